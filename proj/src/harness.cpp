/* Copyright 2026 The Crossgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "crossgate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace crossgate::harness {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::kSyn: return "syn";
    case Mode::kReal: return "real";
    case Mode::kSynPlusReal: return "syn_plus_real";
    case Mode::kSynToReal: return "syn_to_real";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "syn") return Mode::kSyn;
  if (s == "real") return Mode::kReal;
  if (s == "syn_plus_real") return Mode::kSynPlusReal;
  if (s == "syn_to_real") return Mode::kSynToReal;
  throw ConfigError("unknown mode: " + s);
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (mode == Mode::kSynToReal && !(branch_knowd || branch_stys || branch_dista))
    throw ConfigError("syn_to_real mode requires at least one enabled branch");
  if (p_horizon != 8 && p_horizon != 16 && p_horizon != 32)
    throw ConfigError("p_horizon must be one of 8, 16, 32");
  if (t_obs < 2) throw ConfigError("t_obs must be >= 2");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  if (gate_norm != "softmax" && gate_norm != "l1")
    throw ConfigError("gate_norm must be softmax or l1");
  if (!(eta_gumbel > 0.0)) throw ConfigError("eta_gumbel must be > 0");
  if (adain_block < 0 || adain_block > psi_depth)
    throw ConfigError("adain_block must lie in [0, psi_depth]");
  try {
    encoder_config().validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig e;
  e.feature_dim = feature_dim;
  e.t_obs = t_obs;
  e.p_horizon = p_horizon;
  e.teacher_layers = teacher_layers;
  e.teacher_heads = teacher_heads;
  e.teacher_mlp = 4 * feature_dim;
  e.student_channels = student_channels;
  e.student_lstm_hidden = student_lstm_hidden;
  e.psi_depth = psi_depth;
  e.psi_heads = psi_heads;
  e.psi_mlp = 4 * feature_dim;
  e.patch_size = patch_size;
  e.region_h = region_size;
  e.region_w = region_size;
  e.dropout = dropout;
  return e;
}

std::vector<std::string> RunConfig::enabled_branches() const {
  std::vector<std::string> v;
  if (branch_knowd) v.push_back("knowd");
  if (branch_stys) v.push_back("stys");
  if (branch_dista) v.push_back("dista");
  return v;
}

namespace {

struct KeyHandler {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

int parse_int(const std::string& v) {
  size_t pos = 0;
  const int r = std::stoi(v, &pos);
  if (pos != v.size()) throw ConfigError("bad integer value: " + v);
  return r;
}

double parse_double(const std::string& v) {
  size_t pos = 0;
  const double r = std::stod(v, &pos);
  if (pos != v.size()) throw ConfigError("bad numeric value: " + v);
  return r;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean value: " + v);
}

const std::vector<std::pair<std::string, KeyHandler>>& config_keys() {
  auto int_key = [](int RunConfig::*f) {
    return KeyHandler{[f](const RunConfig& c) { return std::to_string(c.*f); },
                      [f](RunConfig& c, const std::string& v) { c.*f = parse_int(v); }};
  };
  auto dbl_key = [](double RunConfig::*f) {
    return KeyHandler{[f](const RunConfig& c) { return fmt_double(c.*f); },
                      [f](RunConfig& c, const std::string& v) { c.*f = parse_double(v); }};
  };
  auto bool_key = [](bool RunConfig::*f) {
    return KeyHandler{[f](const RunConfig& c) { return std::string(c.*f ? "true" : "false"); },
                      [f](RunConfig& c, const std::string& v) { c.*f = parse_bool(v); }};
  };
  auto str_key = [](std::string RunConfig::*f) {
    return KeyHandler{[f](const RunConfig& c) { return c.*f; },
                      [f](RunConfig& c, const std::string& v) { c.*f = v; }};
  };

  static const std::vector<std::pair<std::string, KeyHandler>> keys = {
      {"mode",
       {[](const RunConfig& c) { return std::string(to_string(c.mode)); },
        [](RunConfig& c, const std::string& v) { c.mode = mode_from_string(v); }}},
      {"branches",
       {[](const RunConfig& c) {
          const auto v = c.enabled_branches();
          std::string s;
          for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
          return s.empty() ? "none" : s;
        },
        [](RunConfig& c, const std::string& v) {
          c.branch_knowd = c.branch_stys = c.branch_dista = false;
          if (v == "none") return;
          for (const auto& b : split_list(v, ',')) {
            if (b == "knowd") c.branch_knowd = true;
            else if (b == "stys") c.branch_stys = true;
            else if (b == "dista") c.branch_dista = true;
            else throw ConfigError("unknown branch: " + b);
          }
        }}},
      {"t_obs", int_key(&RunConfig::t_obs)},
      {"tau", int_key(&RunConfig::tau)},
      {"p_horizon", int_key(&RunConfig::p_horizon)},
      {"batch_size", int_key(&RunConfig::batch_size)},
      {"lr", dbl_key(&RunConfig::lr)},
      {"lr_decay", dbl_key(&RunConfig::lr_decay)},
      {"lr_decay_every", int_key(&RunConfig::lr_decay_every)},
      {"epochs", int_key(&RunConfig::epochs)},
      {"auto_epoch_scale", bool_key(&RunConfig::auto_epoch_scale)},
      {"teacher_epochs", int_key(&RunConfig::teacher_epochs)},
      {"dropout", dbl_key(&RunConfig::dropout)},
      {"seed",
       {[](const RunConfig& c) { return std::to_string(c.seed); },
        [](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); }}},
      {"feature_dim", int_key(&RunConfig::feature_dim)},
      {"region_size", int_key(&RunConfig::region_size)},
      {"patch_size", int_key(&RunConfig::patch_size)},
      {"psi_depth", int_key(&RunConfig::psi_depth)},
      {"psi_heads", int_key(&RunConfig::psi_heads)},
      {"teacher_layers", int_key(&RunConfig::teacher_layers)},
      {"teacher_heads", int_key(&RunConfig::teacher_heads)},
      {"student_channels", int_key(&RunConfig::student_channels)},
      {"student_lstm_hidden", int_key(&RunConfig::student_lstm_hidden)},
      {"lambda_grl", dbl_key(&RunConfig::lambda_grl)},
      {"grl_warmup_epochs", int_key(&RunConfig::grl_warmup_epochs)},
      {"alpha_style", dbl_key(&RunConfig::alpha_style)},
      {"beta_crop", dbl_key(&RunConfig::beta_crop)},
      {"adain_block", int_key(&RunConfig::adain_block)},
      {"gate_norm", str_key(&RunConfig::gate_norm)},
      {"eta_gumbel", dbl_key(&RunConfig::eta_gumbel)},
      {"fol", bool_key(&RunConfig::fol)},
      {"data_dir", str_key(&RunConfig::data_dir)},
      {"out_dir", str_key(&RunConfig::out_dir)},
      {"export_features", bool_key(&RunConfig::export_features)},
      {"tau_sweep", str_key(&RunConfig::tau_sweep)},
      {"ablate_subsets", str_key(&RunConfig::ablate_subsets)},
  };
  return keys;
}

}  // namespace

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [name, h] : config_keys()) os << name << " = " << h.get(*this) << "\n";
  return os.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& [name, h] : config_keys()) {
      if (name == key) {
        try {
          h.set(cfg, value);
        } catch (const ConfigError&) {
          throw;
        } catch (const std::exception& e) {
          throw ConfigError("config key '" + key + "': " + e.what());
        }
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key: " + key);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  try {
    return from_text(read_text(path));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Model

Model Model::build(const RunConfig& cfg, Rng& rng) {
  Model m;
  m.enc = cfg.encoder_config();
  m.teacher = std::make_unique<TeacherEncoder>(m.enc, rng);
  m.student = std::make_unique<StudentEncoder>(m.enc, rng);
  m.psi = std::make_unique<PsiBackbone>(m.enc, rng);
  m.disc = std::make_unique<dista::DomainDiscriminator>(m.enc.feature_dim, rng, cfg.lambda_grl);
  m.lgu = std::make_unique<fusion::GatedFusion>(
      m.enc.feature_dim, rng,
      cfg.gate_norm == "softmax" ? fusion::GateNorm::kSoftmax : fusion::GateNorm::kL1);
  m.predictor = std::make_unique<fusion::CrossingPredictor>(m.enc.feature_dim, rng,
                                                            cfg.eta_gumbel, cfg.dropout);
  return m;
}

std::vector<std::pair<std::string, nn::ParamStore*>> Model::stores() {
  return {{"teacher", &teacher->params()}, {"student", &student->params()},
          {"psi", &psi->params()},         {"disc", &disc->params()},
          {"lgu", &lgu->params()},         {"predictor", &predictor->params()}};
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::load(const syngen::DatasetManifest& manifest) {
  Dataset d;
  d.manifest = manifest;
  for (const auto& rec : manifest.clips) {
    Clip clip = syngen::load_clip(manifest.root + "/" + rec.path);
    if (rec.domain == Domain::kSynthetic) d.syn_train.push_back(std::move(clip));
    else if (rec.split == "train") d.real_train.push_back(std::move(clip));
    else d.real_test.push_back(std::move(clip));
  }
  return d;
}

void Dataset::check_mode(Mode mode) const {
  const bool needs_syn = mode == Mode::kSyn || mode == Mode::kSynPlusReal || mode == Mode::kSynToReal;
  const bool needs_real = mode != Mode::kSyn;
  if (needs_syn && syn_train.empty())
    throw ConfigError(std::string("mode ") + to_string(mode) + " requires synthetic clips");
  if (needs_real && real_train.empty())
    throw ConfigError(std::string("mode ") + to_string(mode) + " requires real training clips");
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(RunConfig cfg, const syngen::DatasetManifest& manifest)
    : cfg_(std::move(cfg)), data_(Dataset::load(manifest)), rng_(cfg_.seed),
      model_(Model::build(cfg_, rng_)) {
  cfg_.validate();
  data_.check_mode(cfg_.mode);
  if (cfg_.t_obs != manifest.spec.t_obs || cfg_.p_horizon != manifest.spec.p_horizon)
    throw ConfigError("config T/P do not match the dataset manifest");
  shifter_ = std::make_unique<stys::StyleShifter>(*model_.psi, cfg_.beta_crop, cfg_.alpha_style,
                                                  cfg_.adain_block);
  const size_t n_train = classification_pool().size();
  effective_epochs_ = cfg_.epochs;
  if (cfg_.auto_epoch_scale && n_train < 1000) {
    const int scaled = static_cast<int>(
        std::lround(cfg_.epochs * static_cast<double>(n_train) / 1000.0));
    effective_epochs_ = std::max(std::min(cfg_.epochs, 8), scaled);
  }
  build_optimizer();
}

std::vector<const Clip*> Trainer::classification_pool() {
  std::vector<const Clip*> pool;
  auto add = [&](const std::vector<Clip>& v) {
    for (const auto& c : v) pool.push_back(&c);
  };
  switch (cfg_.mode) {
    case Mode::kSyn: add(data_.syn_train); break;
    case Mode::kReal: add(data_.real_train); break;
    case Mode::kSynPlusReal:
      add(data_.syn_train);
      add(data_.real_train);
      break;
    case Mode::kSynToReal: add(data_.real_train); break;
  }
  return pool;
}

void Trainer::build_optimizer() {
  std::vector<Var> params;
  auto append = [&](const nn::ParamStore& ps) {
    for (const auto& p : ps.params()) params.push_back(p);
  };
  append(model_.student->params());
  append(model_.psi->params());
  if (cfg_.mode == Mode::kSynToReal && cfg_.branch_dista) append(model_.disc->params());
  append(model_.lgu->params());
  append(model_.predictor->params());
  opt_ = std::make_unique<nn::Adam>(std::move(params), cfg_.lr);
}

void Trainer::teacher_phase() {
  if (cfg_.mode != Mode::kSynToReal || !cfg_.branch_knowd || teacher_ready_) return;
  std::vector<knowd::TrackSample> samples;
  samples.reserve(data_.syn_train.size());
  for (const Clip& c : data_.syn_train) {
    knowd::TrackSample s;
    s.track = track_to_tensor(c.track);
    s.future = track_to_tensor(c.future_track);
    s.label = c.label;
    samples.push_back(std::move(s));
  }
  knowd::TeacherTrainOptions opt;
  opt.epochs = cfg_.teacher_epochs;
  opt.lr = cfg_.lr;
  opt.lr_decay = cfg_.lr_decay;
  opt.lr_decay_every = cfg_.lr_decay_every;
  opt.batch_size = cfg_.batch_size;
  opt.fol = cfg_.fol;
  knowd::train_teacher_inplace(*model_.teacher, samples, opt, rng_, &teacher_loss_log_);
  teacher_ready_ = true;
}

LossBreakdown Trainer::joint_step(const std::vector<const Clip*>& cls_batch,
                                  const std::vector<const Clip*>& syn_batch, bool apply) {
  const bool transfer = cfg_.mode == Mode::kSynToReal;
  const bool use_stys = transfer && cfg_.branch_stys && !syn_batch.empty();
  const bool use_dista = transfer && cfg_.branch_dista && !syn_batch.empty();
  const bool use_knowd = transfer && cfg_.branch_knowd;

  std::vector<Var> con_terms, sty_terms, fea_terms, loc_terms, pre_terms, cla_terms;
  std::vector<std::pair<Var, Domain>> dom_feats;

  for (size_t i = 0; i < cls_batch.size(); ++i) {
    const Clip& clip = *cls_batch[i];
    TrackEncodeOut s_out = model_.student->encode(clip.track);

    Var f_real, f_st;
    if (use_stys) {
      const Clip& style = *syn_batch[i % syn_batch.size()];
      stys::StyleTransferOut sto = shifter_->encode(clip, style);
      f_real = sto.f_real;
      f_st = sto.f_st;
      con_terms.push_back(sto.loss_con);
      sty_terms.push_back(sto.loss_sty);
    } else {
      f_real = dista::dista_encode(*model_.psi, clip, cfg_.beta_crop);
      f_st = f_real;
    }

    if (use_knowd) {
      TrackEncodeOut t_out = model_.teacher->encode(clip.track);
      fea_terms.push_back(knowd::loss_fea(t_out.embedding, s_out.embedding));
      if (cfg_.fol) {
        loc_terms.push_back(knowd::loss_loc(s_out.future, t_out.future));
        pre_terms.push_back(knowd::loss_pre(s_out.future, track_to_tensor(clip.future_track)));
      }
    }

    fusion::GatedFusion::Out gate = model_.lgu->fuse(s_out.embedding, f_st, f_real);
    Var p = model_.predictor->predict(gate.f_gate, true, rng_);
    cla_terms.push_back(fusion::loss_cla(p, fusion::onehot2(static_cast<int>(clip.label))));

    if (use_dista) dom_feats.emplace_back(f_real, clip.domain);
  }

  if (use_dista) {
    for (const Clip* clip : syn_batch) {
      stys::RegionStack depth = stys::crop_raster(*clip->depth, clip->track, cfg_.beta_crop,
                                                  cfg_.region_size, cfg_.region_size);
      stys::RegionStack sem = stys::crop_raster(*clip->semantic, clip->track, cfg_.beta_crop,
                                                cfg_.region_size, cfg_.region_size);
      dom_feats.emplace_back(model_.psi->encode(depth.regions), Domain::kSynthetic);
      dom_feats.emplace_back(model_.psi->encode(sem.regions), Domain::kSynthetic);
    }
  }

  auto batch_mean = [](const std::vector<Var>& v) { return ag::mean(ag::concat_cols(v)); };
  Var zero = ag::constant(Tensor::scalar(0.0));

  Var l_con = con_terms.empty() ? zero : batch_mean(con_terms);
  Var l_sty = sty_terms.empty() ? zero : batch_mean(sty_terms);
  Var l_st = use_stys ? ag::add(l_con, ag::scalar_mul(l_sty, cfg_.alpha_style)) : zero;
  Var l_dom = use_dista ? dista::domain_loss(*model_.disc, dom_feats) : zero;
  Var l_fea = fea_terms.empty() ? zero : batch_mean(fea_terms);
  Var l_loc = loc_terms.empty() ? zero : batch_mean(loc_terms);
  Var l_pre = pre_terms.empty() ? zero : batch_mean(pre_terms);
  Var l_kd = use_knowd ? (cfg_.fol ? ag::add(ag::add(l_fea, l_loc), l_pre) : l_fea) : zero;
  Var l_cla = batch_mean(cla_terms);
  Var total = ag::add(ag::add(ag::add(l_st, l_dom), l_kd), l_cla);

  opt_->zero_grads();
  ag::backward(total);
  if (apply) opt_->step();

  LossBreakdown b;
  b.l_con = l_con->val.item();
  b.l_sty = l_sty->val.item();
  b.l_st = l_st->val.item();
  b.l_dom = l_dom->val.item();
  b.l_fea = use_knowd ? l_fea->val.item() : 0.0;
  b.l_loc = use_knowd && cfg_.fol ? l_loc->val.item() : 0.0;
  b.l_pre = use_knowd && cfg_.fol ? l_pre->val.item() : 0.0;
  b.l_kd = l_kd->val.item();
  b.l_cla = l_cla->val.item();
  b.total = total->val.item();
  return b;
}

LossBreakdown Trainer::debug_step() {
  teacher_phase();
  std::vector<const Clip*> pool = classification_pool();
  std::vector<const Clip*> batch(pool.begin(),
                                 pool.begin() + std::min<size_t>(pool.size(), cfg_.batch_size));
  std::vector<const Clip*> syn;
  if (cfg_.mode == Mode::kSynToReal)
    for (size_t i = 0; i < batch.size() && i < data_.syn_train.size(); ++i)
      syn.push_back(&data_.syn_train[i]);
  return joint_step(batch, syn, false);
}

void Trainer::run() {
  fs::create_directories(cfg_.out_dir);
  write_text(cfg_.out_dir + "/config_echo.txt", cfg_.to_text());
  teacher_phase();
  if (!teacher_loss_log_.empty()) {
    std::ostringstream os;
    os << "epoch,loss\n";
    os.precision(17);
    for (size_t i = 0; i < teacher_loss_log_.size(); ++i)
      os << i << ',' << teacher_loss_log_[i] << "\n";
    write_text(cfg_.out_dir + "/teacher_loss.csv", os.str());
  }

  std::vector<const Clip*> pool = classification_pool();
  std::ostringstream log;
  log << "epoch,l_st,l_con,l_sty,l_dom,l_kd,l_fea,l_loc,l_pre,l_cla,total,lr\n";
  log.precision(17);

  for (int epoch = 0; epoch < effective_epochs_; ++epoch) {
    opt_->set_lr(cfg_.lr * std::pow(cfg_.lr_decay, epoch / cfg_.lr_decay_every));
    if (cfg_.grl_warmup_epochs > 0)
      model_.disc->set_lambda(cfg_.lambda_grl *
                              std::min(1.0, static_cast<double>(epoch + 1) /
                                                cfg_.grl_warmup_epochs));
    rng_.shuffle(pool);
    LossBreakdown mean{};
    int steps = 0;
    for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(cfg_.batch_size)) {
      const size_t end = std::min(pool.size(), start + static_cast<size_t>(cfg_.batch_size));
      std::vector<const Clip*> batch(pool.begin() + static_cast<long>(start),
                                     pool.begin() + static_cast<long>(end));
      std::vector<const Clip*> syn;
      if (cfg_.mode == Mode::kSynToReal) {
        for (size_t i = 0; i < batch.size(); ++i)
          syn.push_back(&data_.syn_train[static_cast<size_t>(
              rng_.index(static_cast<int64_t>(data_.syn_train.size())))]);
      }
      LossBreakdown b = joint_step(batch, syn, true);
      if (!std::isfinite(b.total))
        throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch) +
                              " (last good checkpoint kept in " + cfg_.out_dir + ")");
      step_log_.push_back(b);
      mean.l_st += b.l_st; mean.l_con += b.l_con; mean.l_sty += b.l_sty;
      mean.l_dom += b.l_dom; mean.l_kd += b.l_kd; mean.l_fea += b.l_fea;
      mean.l_loc += b.l_loc; mean.l_pre += b.l_pre; mean.l_cla += b.l_cla;
      mean.total += b.total;
      ++steps;
    }
    const double inv = steps > 0 ? 1.0 / steps : 0.0;
    log << epoch << ',' << mean.l_st * inv << ',' << mean.l_con * inv << ',' << mean.l_sty * inv
        << ',' << mean.l_dom * inv << ',' << mean.l_kd * inv << ',' << mean.l_fea * inv << ','
        << mean.l_loc * inv << ',' << mean.l_pre * inv << ',' << mean.l_cla * inv << ','
        << mean.total * inv << ',' << opt_->lr() << "\n";
    write_text(cfg_.out_dir + "/loss_log.csv", log.str());
    save_checkpoint(cfg_.out_dir + "/checkpoint.bin", cfg_, model_, epoch, rng_.state(),
                    opt_.get());
  }
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_tensor(std::ostream& os, const Tensor& t) {
  put_u32(os, static_cast<uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put_i64(os, t.dim(i));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
int64_t get_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string get_str(std::istream& is) {
  const uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}
Tensor get_tensor(std::istream& is) {
  const uint32_t nd = get_u32(is);
  std::vector<int64_t> shape(nd);
  for (auto& d : shape) d = get_i64(is);
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
  return t;
}

constexpr char kCkptMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, Model& model, int epoch,
                     const std::string& rng_state, nn::Adam* opt) {
  std::ostringstream os(std::ios::binary);
  os.write(kCkptMagic, 8);
  put_str(os, cfg.to_text());
  put_u32(os, static_cast<uint32_t>(epoch));
  put_str(os, rng_state);
  auto stores = model.stores();
  put_u32(os, static_cast<uint32_t>(stores.size()));
  for (auto& [name, ps] : stores) {
    put_str(os, name);
    put_u32(os, static_cast<uint32_t>(ps->params().size()));
    for (const auto& p : ps->params()) {
      put_str(os, p->name);
      put_tensor(os, p->val);
    }
  }
  if (opt != nullptr) {
    os.put(1);
    put_i64(os, opt->step_count());
    put_u32(os, static_cast<uint32_t>(opt->slots().size()));
    for (const auto& s : opt->slots()) {
      put_tensor(os, s.m);
      put_tensor(os, s.v);
    }
  } else {
    os.put(0);
  }
  write_text(path, os.str());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::istringstream is(read_text(path), std::ios::binary);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  LoadedCheckpoint out;
  out.cfg = RunConfig::from_text(get_str(is));
  out.epoch = static_cast<int>(get_u32(is));
  out.rng_state = get_str(is);

  Rng build_rng(out.cfg.seed);
  out.model = std::make_unique<Model>(Model::build(out.cfg, build_rng));
  auto stores = out.model->stores();
  const uint32_t n_stores = get_u32(is);
  if (n_stores != stores.size()) throw std::runtime_error("checkpoint module count mismatch");
  for (auto& [name, ps] : stores) {
    const std::string got = get_str(is);
    if (got != name) throw std::runtime_error("checkpoint module order mismatch: " + got);
    const uint32_t n_params = get_u32(is);
    if (n_params != ps->params().size())
      throw std::runtime_error("checkpoint parameter count mismatch in " + name);
    for (const auto& p : ps->params()) {
      const std::string pname = get_str(is);
      if (pname != p->name) throw std::runtime_error("checkpoint parameter mismatch: " + pname);
      Tensor t = get_tensor(is);
      if (!t.same_shape(p->val)) throw std::runtime_error("checkpoint shape mismatch: " + pname);
      p->val = std::move(t);
    }
  }
  out.has_opt = is.get() == 1;
  if (out.has_opt) {
    out.opt_t = get_i64(is);
    const uint32_t n = get_u32(is);
    out.opt_slots.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
      nn::Adam::Slot s;
      s.m = get_tensor(is);
      s.v = get_tensor(is);
      out.opt_slots.push_back(std::move(s));
    }
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  if (out.cfg.mode == Mode::kSynToReal && out.cfg.branch_knowd) out.model->teacher->freeze();
  return out;
}

// ---------------------------------------------------------------------------
// train / evaluate / ablate / report

std::string train_run(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data_dir.empty() || cfg.out_dir.empty())
    throw ConfigError("train requires data_dir and out_dir");
  syngen::DatasetManifest manifest = syngen::load_manifest(cfg.data_dir + "/manifest.json");
  Trainer trainer(cfg, manifest);
  trainer.run();

  EvalOptions eopts;
  eopts.split = "test";
  eopts.tau_filter = cfg.tau;
  eopts.out_dir = cfg.out_dir;
  eopts.export_features = cfg.export_features;
  metrics::MetricsReport rep =
      evaluate_model(trainer.model(), cfg, trainer.dataset(), eopts);

  ordered_json j;
  j["mode"] = to_string(cfg.mode);
  j["epochs_run"] = trainer.effective_epochs();
  j["steps"] = trainer.step_log().size();
  j["final_total"] = trainer.step_log().empty() ? 0.0 : trainer.step_log().back().total;
  j["checkpoint"] = cfg.out_dir + "/checkpoint.bin";
  j["metrics"] = ordered_json::parse(rep.to_json());
  const std::string text = j.dump(2) + "\n";
  write_text(cfg.out_dir + "/summary.json", text);
  return text;
}

metrics::MetricsReport evaluate_model(Model& model, const RunConfig& cfg, const Dataset& data,
                                      const EvalOptions& opts) {
  const std::vector<Clip>* split = nullptr;
  if (opts.split == "test") split = &data.real_test;
  else if (opts.split == "train") split = &data.real_train;
  else throw ConfigError("evaluate: unknown split " + opts.split);
  if (split->empty()) throw ConfigError("evaluate: split '" + opts.split + "' is empty");

  std::vector<const Clip*> clips;
  for (const Clip& c : *split) {
    if (c.domain != Domain::kReal)
      throw ConfigError("evaluate: synthetic-modality inputs are not allowed at test time");
    if (opts.tau_filter > 0 && c.label == CrossLabel::kCrossing &&
        c.ttc_frames != opts.tau_filter)
      continue;
    clips.push_back(&c);
  }
  if (clips.empty()) throw ConfigError("evaluate: no clips match the tau filter");

  Rng dummy(0);
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<metrics::FolMetrics> fol_rows;
  std::ostringstream preds, fol_preds;
  preds << "id,label,ttc,score\n";
  preds.precision(17);
  fol_preds << "id,frame,px,py,pw,ph,gx,gy,gw,gh\n";
  fol_preds.precision(17);
  std::vector<dista::FeatureExportRow> feature_rows;

  const double W = data.manifest.spec.frame_w, H = data.manifest.spec.frame_h;
  metrics::FolMetrics fol_mean;
  for (const Clip* clip : clips) {
    TrackEncodeOut s_out = model.student->encode(clip->track);
    Var f_real = dista::dista_encode(*model.psi, *clip, cfg.beta_crop);
    fusion::GatedFusion::Out gate = model.lgu->fuse(s_out.embedding, f_real, f_real);
    Var p = model.predictor->predict(gate.f_gate, false, dummy);
    const double score = p->val.at(0, static_cast<int64_t>(CrossLabel::kCrossing));
    scores.push_back(score);
    labels.push_back(static_cast<int>(clip->label));
    preds << clip->id << ',' << static_cast<int>(clip->label) << ',' << clip->ttc_frames << ','
          << score << "\n";

    if (cfg.fol) {
      BoxTrack pred_track = tensor_to_track(s_out.future->val);
      metrics::FolMetrics fm = metrics::fol_metrics(pred_track, clip->future_track, W, H);
      fol_mean.aiou += fm.aiou; fol_mean.fiou += fm.fiou;
      fol_mean.ade += fm.ade; fol_mean.fde += fm.fde;
      fol_rows.push_back(fm);
      for (size_t t = 0; t < pred_track.size(); ++t) {
        const BoundingBox& pb = pred_track[t];
        const BoundingBox& gb = clip->future_track[t];
        fol_preds << clip->id << ',' << t << ',' << pb.x() << ',' << pb.y() << ',' << pb.w()
                  << ',' << pb.h() << ',' << gb.x() << ',' << gb.y() << ',' << gb.w() << ','
                  << gb.h() << "\n";
      }
    }
    if (opts.export_features) {
      FeatureEmbedding emb(std::vector<double>(f_real->val.data(),
                                               f_real->val.data() + f_real->val.numel()));
      feature_rows.push_back({std::move(emb), clip->domain, clip->label});
    }
  }

  metrics::MetricsReport rep;
  rep.cls = metrics::classification_metrics(scores, labels);
  if (cfg.fol && !fol_rows.empty()) {
    const double inv = 1.0 / static_cast<double>(fol_rows.size());
    rep.fol = metrics::FolMetrics{fol_mean.aiou * inv, fol_mean.fiou * inv, fol_mean.ade * inv,
                                  fol_mean.fde * inv};
  }
  rep.n_samples = static_cast<int>(clips.size());
  rep.t_obs = cfg.t_obs;
  rep.tau = opts.tau_filter;
  rep.p_horizon = cfg.p_horizon;
  rep.mode = to_string(cfg.mode);

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text(opts.out_dir + "/predictions.csv", preds.str());
    if (cfg.fol) write_text(opts.out_dir + "/fol_predictions.csv", fol_preds.str());
    write_text(opts.out_dir + "/metrics.json", rep.to_json());
    if (opts.export_features)
      dista::export_features_csv(opts.out_dir + "/features.csv", feature_rows);
  }
  return rep;
}

metrics::MetricsReport evaluate(const std::string& checkpoint_path,
                                const syngen::DatasetManifest& manifest,
                                const EvalOptions& opts) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
  Dataset data = Dataset::load(manifest);
  return evaluate_model(*ck.model, ck.cfg, data, opts);
}

std::string ablate_run(const RunConfig& base) {
  base.validate();
  if (base.data_dir.empty() || base.out_dir.empty())
    throw ConfigError("ablate requires data_dir and out_dir");
  syngen::DatasetManifest manifest = syngen::load_manifest(base.data_dir + "/manifest.json");

  std::vector<std::vector<std::string>> subsets;
  if (base.ablate_subsets.empty()) {
    const std::vector<std::string> names = {"stys", "dista", "knowd"};
    for (int mask = 0; mask < 8; ++mask) {
      std::vector<std::string> s;
      for (int b = 0; b < 3; ++b)
        if (mask & (1 << b)) s.push_back(names[static_cast<size_t>(b)]);
      subsets.push_back(std::move(s));
    }
  } else {
    for (const auto& group : split_list(base.ablate_subsets, ';')) {
      if (group == "none") subsets.push_back({});
      else subsets.push_back(split_list(group, ','));
    }
  }

  ordered_json rows = ordered_json::array();
  std::ostringstream md;
  md << "| stys | dista | knowd | acc | auc | f1 | precision | recall |\n";
  md << "|---|---|---|---|---|---|---|---|\n";

  auto run_one = [&](const std::vector<std::string>& subset) {
    RunConfig cfg = base;
    cfg.branch_knowd = cfg.branch_stys = cfg.branch_dista = false;
    for (const auto& b : subset) {
      if (b == "knowd") cfg.branch_knowd = true;
      else if (b == "stys") cfg.branch_stys = true;
      else if (b == "dista") cfg.branch_dista = true;
      else throw ConfigError("ablate: unknown branch " + b);
    }
    cfg.mode = subset.empty() ? Mode::kReal : Mode::kSynToReal;
    std::string subset_name = subset.empty() ? "none" : "";
    for (size_t i = 0; i < subset.size(); ++i) subset_name += (i ? "," : "") + subset[i];
    cfg.out_dir = base.out_dir + "/ablate_" +
                  (subset.empty() ? "none" : [&] {
                    std::string s;
                    for (size_t i = 0; i < subset.size(); ++i) s += (i ? "_" : "") + subset[i];
                    return s;
                  }());
    Trainer trainer(cfg, manifest);
    trainer.run();
    EvalOptions eopts;
    metrics::MetricsReport rep = evaluate_model(trainer.model(), cfg, trainer.dataset(), eopts);
    ordered_json row;
    row["branches"] = subset_name;
    row["mode"] = to_string(cfg.mode);
    row["metrics"] = ordered_json::parse(rep.to_json());
    rows.push_back(row);
    md << "| " << (cfg.branch_stys ? "x" : " ") << " | " << (cfg.branch_dista ? "x" : " ")
       << " | " << (cfg.branch_knowd ? "x" : " ") << " | " << rep.cls.acc << " | "
       << (rep.cls.auc ? std::to_string(*rep.cls.auc) : "-") << " | " << rep.cls.f1 << " | "
       << rep.cls.precision << " | " << rep.cls.recall << " |\n";
  };

  for (const auto& subset : subsets) run_one(subset);

  // Table-5-style TTC sweep on the full configuration.
  ordered_json sweep = ordered_json::array();
  if (!base.tau_sweep.empty()) {
    RunConfig cfg = base;
    cfg.mode = Mode::kSynToReal;
    cfg.branch_knowd = cfg.branch_stys = cfg.branch_dista = true;
    cfg.out_dir = base.out_dir + "/ablate_ttc_sweep";
    Trainer trainer(cfg, manifest);
    trainer.run();
    for (const auto& tau_s : split_list(base.tau_sweep, ',')) {
      EvalOptions eopts;
      eopts.tau_filter = parse_int(tau_s);
      metrics::MetricsReport rep = evaluate_model(trainer.model(), cfg, trainer.dataset(), eopts);
      ordered_json row;
      row["tau"] = eopts.tau_filter;
      row["metrics"] = ordered_json::parse(rep.to_json());
      sweep.push_back(row);
    }
  }

  ordered_json out;
  out["rows"] = rows;
  out["ttc_sweep"] = sweep;
  const std::string text = out.dump(2) + "\n";
  fs::create_directories(base.out_dir);
  write_text(base.out_dir + "/ablation.json", text);
  write_text(base.out_dir + "/ablation.md", md.str());
  return text;
}

namespace {

// Top-2 principal components by power iteration with deflation.
std::vector<std::array<double, 2>> pca2(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const size_t n = rows.size(), d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& v : mean) v /= static_cast<double>(n);
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (size_t a = 0; a < d; ++a)
      for (size_t b = 0; b < d; ++b) cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
  for (auto& rowv : cov)
    for (auto& v : rowv) v /= static_cast<double>(n);

  auto power_iter = [&](const std::vector<std::vector<double>>& m) {
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    for (int it = 0; it < 200; ++it) {
      std::vector<double> w(d, 0.0);
      for (size_t a = 0; a < d; ++a)
        for (size_t b = 0; b < d; ++b) w[a] += m[a][b] * v[b];
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) return v;
      for (size_t a = 0; a < d; ++a) v[a] = w[a] / norm;
    }
    return v;
  };
  const std::vector<double> p1 = power_iter(cov);
  double lam = 0.0;
  {
    std::vector<double> w(d, 0.0);
    for (size_t a = 0; a < d; ++a)
      for (size_t b = 0; b < d; ++b) w[a] += cov[a][b] * p1[b];
    for (size_t a = 0; a < d; ++a) lam += w[a] * p1[a];
  }
  std::vector<std::vector<double>> cov2 = cov;
  for (size_t a = 0; a < d; ++a)
    for (size_t b = 0; b < d; ++b) cov2[a][b] -= lam * p1[a] * p1[b];
  const std::vector<double> p2 = power_iter(cov2);

  std::vector<std::array<double, 2>> out;
  out.reserve(n);
  for (const auto& r : rows) {
    double x = 0.0, y = 0.0;
    for (size_t j = 0; j < d; ++j) {
      x += (r[j] - mean[j]) * p1[j];
      y += (r[j] - mean[j]) * p2[j];
    }
    out.push_back({x, y});
  }
  return out;
}

}  // namespace

std::string report_run(const std::string& run_dir) {
  ordered_json j;
  j["run_dir"] = run_dir;
  std::ostringstream md;
  md << "# Run report\n\n";

  if (fs::exists(run_dir + "/config_echo.txt")) {
    j["config"] = read_text(run_dir + "/config_echo.txt");
    md << "## Config\n\n```\n" << j["config"].get<std::string>() << "```\n\n";
  }
  if (fs::exists(run_dir + "/metrics.json")) {
    j["metrics"] = ordered_json::parse(read_text(run_dir + "/metrics.json"));
    md << "## Metrics\n\n```json\n" << j["metrics"].dump(2) << "\n```\n\n";
  }
  if (fs::exists(run_dir + "/loss_log.csv")) {
    const std::string log = read_text(run_dir + "/loss_log.csv");
    j["loss_log_rows"] = static_cast<int>(std::count(log.begin(), log.end(), '\n')) - 1;
    md << "## Loss log\n\n" << j["loss_log_rows"].get<int>() << " epochs logged\n\n";
  }
  if (fs::exists(run_dir + "/ablation.json")) {
    j["ablation"] = ordered_json::parse(read_text(run_dir + "/ablation.json"));
    md << "## Ablation\n\nsee ablation.md\n\n";
  }
  if (fs::exists(run_dir + "/features.csv")) {
    // project embeddings to 2D for external plotting
    std::istringstream csv(read_text(run_dir + "/features.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> tags;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string domain, label, tok;
      std::getline(ls, domain, ',');
      std::getline(ls, label, ',');
      std::vector<double> vals;
      while (std::getline(ls, tok, ',')) vals.push_back(std::stod(tok));
      rows.push_back(std::move(vals));
      tags.push_back(domain + "," + label);
    }
    const auto proj = pca2(rows);
    std::ostringstream out;
    out << "x,y,domain,label\n";
    out.precision(17);
    for (size_t i = 0; i < proj.size(); ++i)
      out << proj[i][0] << ',' << proj[i][1] << ',' << tags[i] << "\n";
    write_text(run_dir + "/features_2d.csv", out.str());
    j["features_2d"] = run_dir + "/features_2d.csv";
    md << "## Features\n\n2D projection written to features_2d.csv\n\n";
  }

  const std::string text = j.dump(2) + "\n";
  write_text(run_dir + "/report.json", text);
  write_text(run_dir + "/report.md", md.str());
  return text;
}

}  // namespace crossgate::harness
