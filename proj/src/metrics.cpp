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

#include "crossgate/metrics.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

using ordered_json = nlohmann::ordered_json;

namespace crossgate::metrics {

ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("classification_metrics: size mismatch");
  if (scores.empty()) throw std::invalid_argument("classification_metrics: empty input");

  int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  int64_t n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= 0.5;
    const bool pos = labels[i] == 1;
    if (pos) ++n_pos; else ++n_neg;
    if (pred && pos) ++tp;
    else if (pred && !pos) ++fp;
    else if (!pred && pos) ++fn;
    else ++tn;
  }

  ClassificationMetrics m;
  m.acc = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;

  if (n_pos > 0 && n_neg > 0) {
    // Mann-Whitney via average ranks; ties get 0.5 credit.
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < idx.size()) {
      size_t j = i;
      while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
      const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
      for (size_t k = i; k < j; ++k)
        if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
      i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    m.auc = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  }
  return m;
}

FolMetrics fol_metrics(const BoxTrack& pred, const BoxTrack& gt, double frame_w, double frame_h) {
  if (pred.size() != gt.size() || pred.size() == 0)
    throw std::invalid_argument("fol_metrics: track length mismatch");
  FolMetrics m;
  const size_t p = pred.size();
  double iou_sum = 0.0, dist_sum = 0.0;
  for (size_t i = 0; i < p; ++i) {
    iou_sum += iou(pred[i], gt[i]);
    dist_sum += center_distance(pred[i], gt[i], frame_w, frame_h);
  }
  m.aiou = 100.0 * iou_sum / static_cast<double>(p);
  m.fiou = 100.0 * iou(pred[p - 1], gt[p - 1]);
  m.ade = dist_sum / static_cast<double>(p);
  m.fde = center_distance(pred[p - 1], gt[p - 1], frame_w, frame_h);
  return m;
}

std::string MetricsReport::to_json() const {
  ordered_json j;
  j["acc"] = cls.acc;
  if (cls.auc) j["auc"] = *cls.auc; else j["auc"] = nullptr;
  j["f1"] = cls.f1;
  j["precision"] = cls.precision;
  j["recall"] = cls.recall;
  if (fol) {
    j["aiou"] = fol->aiou;
    j["fiou"] = fol->fiou;
    j["ade"] = fol->ade;
    j["fde"] = fol->fde;
  } else {
    j["aiou"] = nullptr;
    j["fiou"] = nullptr;
    j["ade"] = nullptr;
    j["fde"] = nullptr;
  }
  j["n_samples"] = n_samples;
  j["T"] = t_obs;
  j["tau"] = tau;
  j["P"] = p_horizon;
  j["mode"] = mode;
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  MetricsReport r;
  r.cls.acc = j.at("acc").get<double>();
  if (!j.at("auc").is_null()) r.cls.auc = j.at("auc").get<double>();
  r.cls.f1 = j.at("f1").get<double>();
  r.cls.precision = j.at("precision").get<double>();
  r.cls.recall = j.at("recall").get<double>();
  if (!j.at("aiou").is_null()) {
    FolMetrics f;
    f.aiou = j.at("aiou").get<double>();
    f.fiou = j.at("fiou").get<double>();
    f.ade = j.at("ade").get<double>();
    f.fde = j.at("fde").get<double>();
    r.fol = f;
  }
  r.n_samples = j.at("n_samples").get<int>();
  r.t_obs = j.at("T").get<int>();
  r.tau = j.at("tau").get<int>();
  r.p_horizon = j.at("P").get<int>();
  r.mode = j.at("mode").get<std::string>();
  return r;
}

}  // namespace crossgate::metrics
