#include "softq/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "softq/error.hpp"
#include "softq/format.hpp"
#include "softq/oracle.hpp"
#include "softq/rng.hpp"

namespace softq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_answers(const EvalPair& pair) {
  if (pair.truth.empty()) throw ValidationError("empty ground-truth answer set");
}

// 1-based predicted rank of every entity in the ranking.
std::map<EntityId, std::size_t> ranks_of(const std::vector<EntityId>& ranking) {
  std::map<EntityId, std::size_t> out;
  for (std::size_t i = 0; i < ranking.size(); ++i) out.emplace(ranking[i], i + 1);
  return out;
}

}  // namespace

std::vector<EntityId> full_ranking(const EvalPair& pair) {
  std::vector<std::pair<EntityId, double>> predicted(pair.predicted.begin(),
                                                     pair.predicted.end());
  std::stable_sort(predicted.begin(), predicted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<EntityId> out;
  out.reserve(predicted.size() + pair.truth.size());
  for (const auto& [e, v] : predicted) out.push_back(e);
  for (const auto& [e, v] : pair.truth) {
    if (!pair.predicted.contains(e)) out.push_back(e);
  }
  return out;
}

double precision_at_k(const EvalPair& pair, std::size_t k) {
  require_answers(pair);
  if (k == 0) throw ValidationError("k must be >= 1");
  const auto ranking = full_ranking(pair);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    if (pair.truth.contains(ranking[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

double average_precision(const EvalPair& pair) {
  require_answers(pair);
  const auto ranking = full_ranking(pair);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (!pair.truth.contains(ranking[i])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(pair.truth.size());
}

double mean_average_precision(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ValidationError("no queries to average");
  double sum = 0.0;
  for (const auto& p : pairs) sum += average_precision(p);
  return sum / static_cast<double>(pairs.size());
}

double ndcg(const EvalPair& pair, std::optional<std::size_t> k) {
  require_answers(pair);
  const std::size_t cutoff = std::min(k.value_or(pair.truth.size()), pair.truth.size());
  if (cutoff == 0) throw ValidationError("k must be >= 1");
  std::vector<std::pair<EntityId, double>> ideal(pair.truth.begin(), pair.truth.end());
  std::stable_sort(ideal.begin(), ideal.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto rank = ranks_of(full_ranking(pair));
  double dcg = 0.0, z = 0.0;
  for (std::size_t i = 1; i <= cutoff; ++i) {
    const double discount = 1.0 / std::log2(static_cast<double>(i) + 1.0);
    dcg += (1.0 / static_cast<double>(rank.at(ideal[i - 1].first))) * discount;
    z += (1.0 / static_cast<double>(i)) * discount;
  }
  return dcg / z;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("length mismatch");
  const std::size_t n = x.size();
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool tx = x[i] == x[j], ty = y[i] == y[j];
      if (tx) ++ties_x;
      if (ty) ++ties_y;
      if (tx || ty) continue;
      if ((x[i] < x[j]) == (y[i] < y[j])) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const auto n0 = static_cast<long long>(n * (n - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(n0 - ties_x) *
                                 static_cast<double>(n0 - ties_y));
  if (denom == 0.0) return 0.0;
  return static_cast<double>(concordant - discordant) / denom;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("length mismatch");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::pair<std::vector<double>, std::vector<double>> correlation_inputs(const EvalPair& pair) {
  if (pair.truth.size() < 2) throw ValidationError("rank correlation needs |A| >= 2");
  std::vector<double> x, y;
  for (const auto& [e, v] : pair.truth) {
    x.push_back(v);
    const auto it = pair.predicted.find(e);
    y.push_back(it == pair.predicted.end() ? -kInf : it->second);
  }
  return {x, y};
}

}  // namespace

double kendall_tau(const EvalPair& pair) {
  const auto [x, y] = correlation_inputs(pair);
  return kendall_tau_b(x, y);
}

double spearman_rho(const EvalPair& pair) {
  const auto [x, y] = correlation_inputs(pair);
  return spearman(x, y);
}

nlohmann::json EvalReport::to_json() const {
  auto row = [](const MetricRow& r) {
    return nlohmann::json{{"type", r.type},
                          {"queries", r.queries},
                          {"correlation_queries", r.correlation_queries},
                          {"skipped", r.skipped},
                          {"map", r.map},
                          {"ndcg", r.ndcg},
                          {"tau", r.tau},
                          {"rho", r.rho}};
  };
  nlohmann::json types = nlohmann::json::array();
  for (const auto& r : per_type) types.push_back(row(r));
  return {{"per_type", types}, {"average", row(average)}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "type,queries,skipped,tau,rho,map,ndcg\n";
  auto line = [&](const MetricRow& r) {
    out << r.type << ',' << r.queries << ',' << r.skipped << ',' << format_double(r.tau) << ','
        << format_double(r.rho) << ',' << format_double(r.map) << ','
        << format_double(r.ndcg) << '\n';
  };
  for (const auto& r : per_type) line(r);
  line(average);
  return out.str();
}

EvalReport evaluate_run(std::span<const DatasetRecord> records,
                        const std::map<std::string, AnswerMap>& predictions,
                        std::optional<std::size_t> ndcg_k) {
  if (records.empty()) throw ValidationError("no records to evaluate");
  std::map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second) throw ValidationError("duplicate record id " + r.id);
  }
  for (const auto& [id, m] : predictions) {
    if (!by_id.contains(id)) throw ValidationError("prediction for unknown query id " + id);
  }

  struct Acc {
    MetricRow row;
    double ap = 0.0, nd = 0.0, tau = 0.0, rho = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : records) {
    EvalPair pair;
    pair.truth = r.test_answers;
    if (auto it = predictions.find(r.id); it != predictions.end()) pair.predicted = it->second;
    pair.type = std::string(to_string(r.type));
    Acc& a = acc[pair.type];
    a.row.type = pair.type;
    ++a.row.queries;
    a.ap += average_precision(pair);
    a.nd += ndcg(pair, ndcg_k);
    if (pair.truth.size() >= 2) {
      ++a.row.correlation_queries;
      a.tau += kendall_tau(pair);
      a.rho += spearman_rho(pair);
    } else {
      ++a.row.skipped;
    }
  }

  EvalReport report;
  report.average.type = "AVG";
  for (auto& [type, a] : acc) {
    const double q = static_cast<double>(a.row.queries);
    a.row.map = a.ap / q;
    a.row.ndcg = a.nd / q;
    if (a.row.correlation_queries) {
      const double c = static_cast<double>(a.row.correlation_queries);
      a.row.tau = a.tau / c;
      a.row.rho = a.rho / c;
    }
    report.per_type.push_back(a.row);
    report.average.queries += a.row.queries;
    report.average.correlation_queries += a.row.correlation_queries;
    report.average.skipped += a.row.skipped;
    report.average.map += a.row.map;
    report.average.ndcg += a.row.ndcg;
    report.average.tau += a.row.tau;
    report.average.rho += a.row.rho;
  }
  const double t = static_cast<double>(report.per_type.size());
  report.average.map /= t;
  report.average.ndcg /= t;
  report.average.tau /= t;
  report.average.rho /= t;
  return report;
}

std::map<std::string, AnswerMap> read_predictions(const std::filesystem::path& path,
                                                  const UncertainKG& kg) {
  std::ifstream in(path);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
  }
  std::map<std::string, AnswerMap> out;
  std::string line;
  std::size_t lineno = 0, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw FormatError("expected 3 tab-separated fields", lineno);
    }
    const std::string id = line.substr(0, t1);
    const std::string name = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string value = line.substr(t2 + 1);
    const auto e = kg.entities().find(name);
    if (!e) throw FormatError("unknown entity '" + name + "'", lineno);
    ++rows;
    if (value == "-inf") continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v)) {
      throw FormatError("malformed utility", lineno);
    }
    if (!out[id].emplace(*e, v).second) throw FormatError("duplicate prediction", lineno);
  }
  if (rows == 0) throw FormatError("empty prediction file");
  return out;
}

PerturbedBackend::PerturbedBackend(const ConfidenceBackend& base, double amplitude,
                                   std::uint64_t seed)
    : base_(&base), amplitude_(amplitude), seed_(seed) {
  if (!(amplitude >= 0.0 && amplitude <= 1.0)) {
    throw ValidationError("noise amplitude must lie in [0,1]");
  }
}

double PerturbedBackend::confidence(EntityId s, RelationId r, EntityId o) const {
  const std::uint64_t h = derive_seed(seed_, "noise", {s, r, o});
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  const double noise = std::trunc((2.0 * u - 1.0) * amplitude_ * 1024.0) / 1024.0;
  return clamp_confidence(base_->confidence(s, r, o) + noise);
}

double utility_distance(double a, double b) {
  const bool za = semiring::is_zero(a), zb = semiring::is_zero(b);
  if (za && zb) return 0.0;
  if (za || zb) return kInf;
  return std::abs(a - b);
}

namespace {

double atom_epsilon(const SoftAtom& a, const ConfidenceBackend& truth,
                    const ConfidenceBackend& noisy) {
  const std::size_t n = truth.num_entities();
  auto range = [&](const Term& t) {
    std::vector<EntityId> out;
    if (t.is_constant()) {
      out.push_back(t.id);
    } else {
      for (EntityId e = 0; e < n; ++e) out.push_back(e);
    }
    return out;
  };
  const auto heads = range(a.head);
  std::vector<EntityId> tails = range(a.tail);
  const bool loop = a.head.is_variable() && a.head == a.tail;
  double eps = 0.0;
  for (EntityId h : heads) {
    for (EntityId t : tails) {
      if (loop && h != t) continue;
      const double v = atom_value(truth.confidence(h, a.relation, t), a.alpha, a.beta,
                                  a.negated);
      const double w = atom_value(noisy.confidence(h, a.relation, t), a.alpha, a.beta,
                                  a.negated);
      eps = std::max(eps, utility_distance(v, w));
    }
  }
  return eps;
}

}  // namespace

ProbeResult error_accumulation_probe(const SoftQuery& query, const ConfidenceBackend& truth,
                                     double amplitude, std::size_t trials, std::uint64_t seed,
                                     std::uint64_t budget) {
  ProbeResult result;
  result.min_slack = kInf;
  const UtilityVector exact = brute_force_utility(query, truth, budget);
  for (std::size_t t = 0; t < trials; ++t) {
    const PerturbedBackend noisy(truth, amplitude, derive_seed(seed, "probe", {t}));
    const UtilityVector approx = brute_force_utility(query, noisy, budget);
    ProbeTrial trial;
    for (const auto& conj : query.disjuncts) {
      double sum = 0.0;
      for (const auto& a : conj.atoms) {
        trial.epsilons.push_back(atom_epsilon(a, truth, noisy));
        sum += trial.epsilons.back();
      }
      trial.bound = std::max(trial.bound, sum);
    }
    for (std::size_t e = 0; e < exact.size(); ++e) {
      trial.observed = std::max(trial.observed, utility_distance(exact[e], approx[e]));
    }
    trial.violated = trial.observed > trial.bound;
    result.max_observed = std::max(result.max_observed, trial.observed);
    if (std::isfinite(trial.bound)) {
      result.min_slack = std::min(result.min_slack, trial.bound - trial.observed);
    }
    result.violated = result.violated || trial.violated;
    result.trials.push_back(std::move(trial));
  }
  if (trials == 0) result.min_slack = 0.0;
  return result;
}

}  // namespace softq
