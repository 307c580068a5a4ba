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

#ifndef CROSSGATE_DISTA_HPP_
#define CROSSGATE_DISTA_HPP_

#include <string>
#include <utility>
#include <vector>

#include "crossgate/datamodel.hpp"
#include "crossgate/encoders.hpp"

namespace crossgate::dista {

// Gradient-reversal domain classifier: GRL followed by one linear layer
// mapping an embedding to a single domain logit.
class DomainDiscriminator {
 public:
  DomainDiscriminator(int64_t feature_dim, Rng& rng, double lambda = 1.0);

  double lambda() const { return lambda_; }
  void set_lambda(double l) { lambda_ = l; }

  // GRL then linear; gradients reaching the feature side are scaled by
  // -lambda, the discriminator's own weights receive the plain gradient.
  Var domain_logit(const Var& feature) const;
  // Linear only; used to probe feature separability without reversal.
  Var domain_logit_plain(const Var& feature) const;

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

 private:
  nn::ParamStore ps_;
  nn::Linear lin_;
  double lambda_;
};

// Sum over items of BCE(D(grl(f)), y_dom); synthetic = 0, real = 1.
Var domain_loss(const DomainDiscriminator& disc,
                const std::vector<std::pair<Var, Domain>>& features);

// Crop the RGB frames and encode with the shared backbone; identical pipeline
// to the style-transfer content path.
Var dista_encode(const PsiBackbone& psi, const Clip& real_clip, double beta);

struct FeatureExportRow {
  FeatureEmbedding embedding;
  Domain domain;
  CrossLabel label;
};

// (embedding, domain, label) triples as CSV for external embedding analysis.
void export_features_csv(const std::string& path, const std::vector<FeatureExportRow>& rows);

}  // namespace crossgate::dista

#endif  // CROSSGATE_DISTA_HPP_
