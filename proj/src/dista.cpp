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

#include "crossgate/dista.hpp"

#include <fstream>
#include <stdexcept>

#include "crossgate/stys.hpp"

namespace crossgate::dista {

DomainDiscriminator::DomainDiscriminator(int64_t feature_dim, Rng& rng, double lambda)
    : lambda_(lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("DomainDiscriminator: lambda not finite");
  lin_ = nn::Linear(ps_, rng, feature_dim, 1, "domain_lin");
}

Var DomainDiscriminator::domain_logit(const Var& feature) const {
  return lin_(ag::grl(feature, lambda_));
}

Var DomainDiscriminator::domain_logit_plain(const Var& feature) const { return lin_(feature); }

Var domain_loss(const DomainDiscriminator& disc,
                const std::vector<std::pair<Var, Domain>>& features) {
  if (features.empty()) throw std::invalid_argument("domain_loss: empty feature batch");
  std::vector<Var> terms;
  terms.reserve(features.size());
  for (const auto& [feat, domain] : features) {
    const double y = domain == Domain::kReal ? 1.0 : 0.0;
    terms.push_back(ag::bce_logit(disc.domain_logit(feat), y));
  }
  return ag::sum(ag::concat_cols(terms));
}

Var dista_encode(const PsiBackbone& psi, const Clip& real_clip, double beta) {
  stys::RegionStack regions =
      stys::crop_local_region(real_clip, beta, psi.region_h(), psi.region_w());
  return psi.encode(regions.regions);
}

void export_features_csv(const std::string& path, const std::vector<FeatureExportRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "domain,label";
  const int64_t d = rows.empty() ? 0 : rows.front().embedding.dim();
  for (int64_t i = 0; i < d; ++i) f << ",f" << i;
  f << "\n";
  f.precision(17);
  for (const auto& r : rows) {
    f << to_string(r.domain) << ',' << to_string(r.label);
    for (double v : r.embedding.values) f << ',' << v;
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace crossgate::dista
