// Copyright 2026 The NHR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nhr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "nhr/errors.hpp"

namespace nhr {

std::vector<Index> rank_candidates(std::span<const Index> candidates, std::span<const double> scores) {
  if (candidates.size() != scores.size()) throw ShapeError("rank_candidates: one score per candidate required");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<Index> ranked;
  ranked.reserve(order.size());
  for (auto o : order) ranked.push_back(candidates[o]);
  return ranked;
}

std::vector<Index> rank_candidates(const ScoreFn& score, Index user, std::span<const Index> candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (Index item : candidates) scores.push_back(score(user, item));
  return rank_candidates(candidates, scores);
}

std::size_t position_of(std::span<const Index> ranked, Index item) {
  auto it = std::find(ranked.begin(), ranked.end(), item);
  if (it == ranked.end()) throw ProtocolError("test item " + std::to_string(item) + " missing from ranked list");
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

double hr_at_k(std::span<const Index> ranked, Index test_item, int k, HitMode mode) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const auto pos = position_of(ranked, test_item);
  if (pos > static_cast<std::size_t>(k)) return 0.0;
  return mode == HitMode::kIndicator ? 1.0 : 1.0 / k;
}

double ndcg_at_k(std::span<const Index> ranked, Index test_item, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const auto pos = position_of(ranked, test_item);
  if (pos > static_cast<std::size_t>(k)) return 0.0;
  return 1.0 / std::log2(static_cast<double>(pos) + 1.0);
}

EvalReport evaluate(const ScoreFn& score, const EvalCandidates& candidates, int k, const std::string& model_tag,
                    const SplitDataset* split, HitMode mode) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (split != nullptr)
    for (Index u : split->eval_users())
      if (candidates.find(u) < 0) throw ProtocolError("user " + std::to_string(u) + " has no candidate set");

  EvalReport report;
  report.model = model_tag;
  report.k = k;
  report.candidates_fingerprint = candidates.fingerprint();
  double hr_sum = 0, ndcg_sum = 0;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    const auto& items = candidates.items[r];
    const Index target = candidates.targets[r];
    if (std::count(items.begin(), items.end(), target) != 1)
      throw ProtocolError("user " + std::to_string(candidates.users[r]) + ": target must appear exactly once");
    const auto ranked = rank_candidates(score, candidates.users[r], items);
    UserEval ue;
    ue.user = candidates.users[r];
    ue.rank = position_of(ranked, target);
    ue.hit = ue.rank <= static_cast<std::size_t>(k);
    ue.hr = hr_at_k(ranked, target, k, mode);
    ue.ndcg = ndcg_at_k(ranked, target, k);
    hr_sum += ue.hr;
    ndcg_sum += ue.ndcg;
    report.per_user.push_back(ue);
  }
  report.users = report.per_user.size();
  if (report.users > 0) {
    report.hr = hr_sum / static_cast<double>(report.users);
    report.ndcg = ndcg_sum / static_cast<double>(report.users);
  }
  return report;
}

ScoreFn scorer_fn(const Scorer<float>& model, const FeatureSet* features) {
  return [&model, features](Index user, Index item) {
    return static_cast<double>(model.logit(Query{user, item, features}));
  };
}

nlohmann::json to_json(const EvalReport& report, bool include_per_user) {
  nlohmann::json j;
  j["model"] = report.model;
  j["k"] = report.k;
  j["hr"] = report.hr;
  j["ndcg"] = report.ndcg;
  j["users"] = report.users;
  j["candidates_fingerprint"] = report.candidates_fingerprint;
  j["hybrid"] = report.hybrid;
  if (include_per_user) {
    auto& rows = j["per_user"] = nlohmann::json::array();
    for (const auto& ue : report.per_user)
      rows.push_back({{"user", ue.user}, {"rank", ue.rank}, {"hit", ue.hit}, {"hr", ue.hr}, {"ndcg", ue.ndcg}});
  }
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.model = j.at("model").get<std::string>();
  r.k = j.at("k").get<int>();
  r.hr = j.at("hr").get<double>();
  r.ndcg = j.at("ndcg").get<double>();
  r.users = j.at("users").get<std::size_t>();
  r.candidates_fingerprint = j.at("candidates_fingerprint").get<std::string>();
  r.hybrid = j.value("hybrid", false);
  return r;
}

std::string comparison_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  const int k = reports.empty() ? 10 : reports.front().k;
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %10s %10s\n", "model", ("HR@" + std::to_string(k)).c_str(),
                ("NDCG@" + std::to_string(k)).c_str());
  out << line;
  out << std::string(42, '-') << '\n';
  bool als_listed = false;
  const EvalReport* best_plain = nullptr;
  const EvalReport* best_hybrid = nullptr;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-20s %10.4f %10.4f\n", r.model.c_str(), r.hr, r.ndcg);
    out << line;
    if (r.model == "als") als_listed = true;
    auto& best = r.hybrid ? best_hybrid : best_plain;
    if (best == nullptr || r.hr > best->hr) best = &r;
  }
  if (!als_listed) {
    std::snprintf(line, sizeof(line), "%-20s %10s %10s  (not implemented)\n", "als", "-", "-");
    out << line;
  }
  if (best_plain != nullptr && best_hybrid != nullptr) {
    auto rel = [](double a, double b) { return b > 0 ? 100.0 * (a - b) / b : 0.0; };
    std::snprintf(line, sizeof(line), "%-20s %9.2f%% %9.2f%%\n", "Im.%", rel(best_hybrid->hr, best_plain->hr),
                  rel(best_hybrid->ndcg, best_plain->ndcg));
    out << line;
    out << "  (" << best_hybrid->model << " vs " << best_plain->model << ")\n";
  }
  std::set<std::string> fingerprints;
  for (const auto& r : reports) fingerprints.insert(r.candidates_fingerprint);
  if (fingerprints.size() > 1)
    out << "WARNING: rows were evaluated on different candidate sets (" << fingerprints.size()
        << " fingerprints); they are not comparable\n";
  else if (!fingerprints.empty())
    out << "candidates " << *fingerprints.begin() << '\n';
  return out.str();
}

}  // namespace nhr
