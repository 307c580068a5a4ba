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

#ifndef CROSSGATE_METRICS_HPP_
#define CROSSGATE_METRICS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "crossgate/datamodel.hpp"

namespace crossgate::metrics {

struct ClassificationMetrics {
  double acc = 0, f1 = 0, precision = 0, recall = 0;
  std::optional<double> auc;  // absent for single-class inputs
};

// Hard metrics threshold the crossing score at 0.5; AUC is the pairwise-rank
// (Mann-Whitney) statistic with 0.5 credit for ties.
ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels);

struct FolMetrics {
  double aiou = 0, fiou = 0;  // percent
  double ade = 0, fde = 0;    // pixels
};

FolMetrics fol_metrics(const BoxTrack& pred, const BoxTrack& gt, double frame_w, double frame_h);

struct MetricsReport {
  ClassificationMetrics cls;
  std::optional<FolMetrics> fol;
  int n_samples = 0;
  int t_obs = 0, tau = 0, p_horizon = 0;
  std::string mode;

  std::string to_json() const;  // flat object with the canonical field names
};

MetricsReport report_from_json(const std::string& text);

}  // namespace crossgate::metrics

#endif  // CROSSGATE_METRICS_HPP_
