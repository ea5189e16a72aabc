/* Copyright 2026 The SpoofScope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spoofscope/gbdt_explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"

namespace spoofscope::gbdt_explain {

namespace {

void permute_column(const Matrix& src, Matrix& dst, std::size_t j,
                    std::span<const std::size_t> perm) {
  for (std::size_t i = 0; i < src.rows(); ++i) dst(i, j) = src(perm[i], j);
}

void restore_column(const Matrix& src, Matrix& dst, std::size_t j) {
  for (std::size_t i = 0; i < src.rows(); ++i) dst(i, j) = src(i, j);
}

void check_inputs(const gbdt::Model& model, const Matrix& x, std::span<const int> y,
                  int repeats) {
  if (x.rows() == 0) throw MetricError("cannot score an empty dataset");
  if (x.rows() != y.size()) throw InputError("feature rows and labels differ in length");
  if (x.cols() != model.n_features) throw InputError("feature dimension does not match the model");
  if (repeats < 1) throw InputError("repeats must be at least 1");
}

std::vector<std::size_t> checked_perm(const PermutationSource& perms, std::size_t n,
                                      std::size_t j, std::size_t r) {
  auto p = perms(j, r);
  if (p.size() != n) throw InputError("permutation has the wrong length");
  return p;
}

}  // namespace

Metric parse_metric(const std::string& name) {
  if (name == "accuracy") return Metric::accuracy;
  if (name == "roc_auc" || name == "auc") return Metric::roc_auc;
  throw UsageError("unknown metric: " + name);
}

std::string to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "roc_auc"; }

double score(const gbdt::Model& model, const Matrix& x, std::span<const int> y, Metric metric) {
  if (x.rows() == 0) throw MetricError("cannot score an empty dataset");
  if (metric == Metric::accuracy) return metrics::accuracy(model.predict(x), y);
  return metrics::roc_auc(model.predict_proba(x), y);
}

PermutationSource seeded_permutations(std::size_t n_rows, std::uint64_t seed) {
  return [n_rows, seed](std::size_t feature, std::size_t repeat) {
    return random_permutation(n_rows, derive_seed(seed, feature, repeat));
  };
}

Matrix permutation_scores(const gbdt::Model& model, const Matrix& x, std::span<const int> y,
                          Metric metric, int repeats, const PermutationSource& perms) {
  check_inputs(model, x, y, repeats);
  const std::size_t d = x.cols();
  const auto r_count = static_cast<std::size_t>(repeats);

  // Draw every permutation up front so a user-supplied source is never called
  // from several threads at once.
  std::vector<std::vector<std::size_t>> drawn(d * r_count);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t r = 0; r < r_count; ++r) drawn[j * r_count + r] = checked_perm(perms, x.rows(), j, r);

  Matrix scores(d, r_count);
  std::exception_ptr error;
#pragma omp parallel
  {
    Matrix work = x;
#pragma omp for schedule(dynamic)
    for (long jj = 0; jj < static_cast<long>(d); ++jj) {
      const auto j = static_cast<std::size_t>(jj);
      try {
        for (std::size_t r = 0; r < r_count; ++r) {
          permute_column(x, work, j, drawn[j * r_count + r]);
          scores(j, r) = score(model, work, y, metric);
        }
        restore_column(x, work, j);
      } catch (...) {
#pragma omp critical(spoofscope_perm_scores)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return scores;
}

namespace serial {

Matrix permutation_scores(const gbdt::Model& model, const Matrix& x, std::span<const int> y,
                          Metric metric, int repeats, const PermutationSource& perms) {
  check_inputs(model, x, y, repeats);
  const auto r_count = static_cast<std::size_t>(repeats);
  Matrix scores(x.cols(), r_count);
  Matrix work = x;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    for (std::size_t r = 0; r < r_count; ++r) {
      permute_column(x, work, j, checked_perm(perms, x.rows(), j, r));
      scores(j, r) = score(model, work, y, metric);
    }
    restore_column(x, work, j);
  }
  return scores;
}

}  // namespace serial

ImportanceReport permutation_importance(const gbdt::Model& model, const Matrix& x,
                                        std::span<const int> y, Metric metric, int repeats,
                                        const PermutationSource& perms,
                                        std::span<const std::string> names) {
  check_inputs(model, x, y, repeats);
  ImportanceReport report;
  report.metric = metric;
  report.baseline = score(model, x, y, metric);
  const Matrix shuffled = permutation_scores(model, x, y, metric, repeats, perms);

  report.features.resize(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    auto& f = report.features[j];
    f.repeats = repeats;
    if (j < names.size()) {
      f.name = names[j];
    } else if (j < model.feature_names.size()) {
      f.name = model.feature_names[j];
    } else {
      f.name = "f" + std::to_string(j);
    }
    double sum = 0.0;
    for (double s : shuffled.row(j)) sum += s;
    const double mean = sum / repeats;
    double var = 0.0;
    for (double s : shuffled.row(j)) var += (s - mean) * (s - mean);
    f.mean = report.baseline - mean;
    f.std = std::sqrt(var / repeats);
  }
  return report;
}

ImportanceReport permutation_importance(const gbdt::Model& model, const Matrix& x,
                                        std::span<const int> y, Metric metric, int repeats,
                                        std::uint64_t seed, std::span<const std::string> names) {
  return permutation_importance(model, x, y, metric, repeats, seeded_permutations(x.rows(), seed),
                                names);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman_matrix(const Matrix& x) {
  if (x.rows() < 2) throw InputError("spearman_matrix needs at least two samples");
  const std::size_t d = x.cols();
  const auto n = static_cast<double>(x.rows());

  // Centred rank columns and their norms.
  std::vector<std::vector<double>> centred(d);
  std::vector<double> norm(d);
  SpearmanResult out;
  out.constant.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    auto r = average_ranks(x.column(j));
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double ss = 0.0;
    for (double& v : r) {
      v -= mean;
      ss += v * v;
    }
    norm[j] = std::sqrt(ss);
    out.constant[j] = !(ss > 0.0);
    centred[j] = std::move(r);
  }

  out.rho = Matrix(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    out.rho(a, a) = 1.0;
    for (std::size_t b = a + 1; b < d; ++b) {
      double rho = 0.0;
      if (!out.constant[a] && !out.constant[b]) {
        double dot = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) dot += centred[a][i] * centred[b][i];
        rho = std::clamp(dot / (norm[a] * norm[b]), -1.0, 1.0);
      }
      out.rho(a, b) = rho;
      out.rho(b, a) = rho;
    }
  }
  return out;
}

FeatureClustering ward_cluster(const Matrix& corr, double threshold) {
  const std::size_t n = corr.rows();
  if (n == 0 || corr.cols() != n) throw InputError("ward_cluster needs a square matrix");

  const std::size_t total = 2 * n - 1;
  std::vector<std::vector<double>> dist(total, std::vector<double>(total, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) dist[a][b] = a == b ? 0.0 : std::max(0.0, 1.0 - corr(a, b));

  std::vector<std::size_t> size(total, 1);
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});

  FeatureClustering out;
  out.distance_threshold = threshold;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    // Active ids stay sorted, so the first minimum found is the
    // lowest-index pair.
    std::size_t ia = 0, ib = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double d = dist[active[i]][active[j]];
        if (d < best) {
          best = d;
          ia = i;
          ib = j;
        }
      }
    }
    const std::size_t a = active[ia], b = active[ib];
    const std::size_t id = n + step;
    size[id] = size[a] + size[b];
    for (std::size_t k : active) {
      if (k == a || k == b) continue;
      const auto nk = static_cast<double>(size[k]);
      const auto na = static_cast<double>(size[a]);
      const auto nb = static_cast<double>(size[b]);
      const double v = ((nk + na) * dist[k][a] * dist[k][a] + (nk + nb) * dist[k][b] * dist[k][b] -
                        nk * best * best) /
                       (nk + na + nb);
      dist[k][id] = dist[id][k] = std::sqrt(std::max(0.0, v));
    }
    out.merges.push_back({a, b, best, size[id]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(ib));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(ia));
    active.push_back(id);
  }

  // Flat cut: apply every merge at or below the threshold.
  std::vector<std::size_t> parent(total);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t k = 0; k < out.merges.size(); ++k) {
    const auto& m = out.merges[k];
    if (m.height <= threshold) {
      parent[find(m.a)] = n + k;
      parent[find(m.b)] = n + k;
    }
  }
  std::vector<std::vector<std::size_t>> groups(total);
  for (std::size_t f = 0; f < n; ++f) groups[find(f)].push_back(f);
  for (auto& g : groups) {
    if (!g.empty()) out.clusters.push_back(std::move(g));
  }
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

std::vector<std::size_t> select_representatives(const FeatureClustering& clustering,
                                                const ImportanceReport& importance) {
  std::vector<std::size_t> reps;
  for (const auto& cluster : clustering.clusters) {
    std::size_t best = cluster.front();
    for (std::size_t f : cluster) {
      if (f >= importance.features.size()) throw InputError("importance does not cover all features");
      if (importance.features[f].mean > importance.features[best].mean) best = f;
    }
    reps.push_back(best);
  }
  return reps;
}

Matrix project_columns(const Matrix& x, std::span<const std::size_t> columns) {
  Matrix out(x.rows(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= x.cols()) throw InputError("column index out of range");
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, c) = x(i, columns[c]);
  }
  return out;
}

SubsetResult retrain_subset(const gbdt::Dataset& train, const gbdt::Dataset& test,
                            std::span<const std::size_t> subset, const gbdt::Config& cfg) {
  if (subset.empty()) throw InputError("feature subset is empty");
  SubsetResult out;
  out.model = gbdt::train(project_columns(train.x, subset), train.y, cfg);
  const Matrix test_x = project_columns(test.x, subset);
  out.report = metrics::evaluate(out.model.predict_proba(test_x), test.y);
  out.report.model_id = "gbdt-subset";
  return out;
}

nlohmann::json to_json(const ImportanceReport& r) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : r.features) {
    features.push_back({{"name", f.name}, {"mean_importance", f.mean}, {"std_importance", f.std},
                        {"repeats", f.repeats}});
  }
  return {{"metric", to_string(r.metric)}, {"baseline", r.baseline}, {"features", features}};
}

nlohmann::json to_json(const FeatureClustering& c, std::span<const std::string> names) {
  const auto label = [&](std::size_t f) { return f < names.size() ? names[f] : "f" + std::to_string(f); };
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : c.merges) {
    merges.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
  }
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cl : c.clusters) {
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t f : cl) members.push_back(label(f));
    clusters.push_back(members);
  }
  nlohmann::json reps = nlohmann::json::array();
  for (std::size_t f : c.representatives) reps.push_back(label(f));
  return {{"distance_threshold", c.distance_threshold},
          {"merges", merges},
          {"clusters", clusters},
          {"representatives", reps}};
}

std::string importance_csv(const ImportanceReport& r) {
  std::ostringstream out;
  out << "feature,mean,std\n";
  char buf[96];
  for (const auto& f : r.features) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", f.mean, f.std);
    out << f.name << buf;
  }
  return out.str();
}

std::string importance_text(const ImportanceReport& r, std::size_t top_k) {
  std::vector<std::size_t> order(r.features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.features[a].mean > r.features[b].mean;
  });
  double top = 0.0;
  for (const auto& f : r.features) top = std::max(top, f.mean);

  std::ostringstream out;
  char buf[160];
  for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
    const auto& f = r.features[order[k]];
    const int bar = top > 0.0 ? static_cast<int>(std::lround(40.0 * std::max(0.0, f.mean) / top)) : 0;
    std::snprintf(buf, sizeof buf, "%-20s %+.4f +/- %.4f  ", f.name.c_str(), f.mean, f.std);
    out << buf << std::string(static_cast<std::size_t>(bar), '#') << '\n';
  }
  return out.str();
}

std::string dendrogram_text(const FeatureClustering& c, std::span<const std::string> names) {
  const std::size_t n = c.merges.size() + 1;
  const auto label = [&](std::size_t id) {
    if (id < n) return id < names.size() ? names[id] : "f" + std::to_string(id);
    return "#" + std::to_string(id - n);
  };
  std::ostringstream out;
  char buf[64];
  for (std::size_t k = 0; k < c.merges.size(); ++k) {
    const auto& m = c.merges[k];
    std::snprintf(buf, sizeof buf, "#%-3zu h=%.4f  ", k, m.height);
    out << buf << label(m.a) << " + " << label(m.b) << " (" << m.size << ")";
    if (m.height > c.distance_threshold) out << "  [above cut]";
    out << '\n';
  }
  out << "clusters at threshold " << c.distance_threshold << ":\n";
  for (const auto& cl : c.clusters) {
    out << "  {";
    for (std::size_t i = 0; i < cl.size(); ++i) out << (i ? ", " : "") << label(cl[i]);
    out << "}\n";
  }
  return out.str();
}

}  // namespace spoofscope::gbdt_explain
