#include "softq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <system_error>

#include "softq/error.hpp"
#include "softq/rng.hpp"
#include "softq/semiring.hpp"

namespace softq {

SoftQuery debias_query(const SoftQuery& query, DebiasConfig cfg) {
  if (!(cfg.delta_alpha >= 0.0 && cfg.delta_alpha <= 1.0)) {
    throw ValidationError("delta_alpha must lie in [0,1]");
  }
  SoftQuery out = query;
  if (cfg.delta_alpha == 0.0) return out;
  for (auto& conj : out.disjuncts) {
    for (auto& atom : conj.atoms) atom.alpha = std::max(atom.alpha - cfg.delta_alpha, 0.0);
  }
  return out;
}

AffineCalibration::AffineCalibration(std::size_t dim)
    : dim_(dim), params_(3 * block_size(dim), 0.0) {}

std::span<double> AffineCalibration::weights(Role role) {
  return std::span(params_).subspan(static_cast<std::size_t>(role) * block_size(dim_), 2 * dim_);
}
std::span<const double> AffineCalibration::weights(Role role) const {
  return std::span(params_).subspan(static_cast<std::size_t>(role) * block_size(dim_), 2 * dim_);
}
std::span<double> AffineCalibration::bias(Role role) {
  return std::span(params_).subspan(
      static_cast<std::size_t>(role) * block_size(dim_) + 2 * dim_, 2);
}
std::span<const double> AffineCalibration::bias(Role role) const {
  return std::span(params_).subspan(
      static_cast<std::size_t>(role) * block_size(dim_) + 2 * dim_, 2);
}

namespace {

struct Pair {
  double rho = 0.0;
  double lambda = 0.0;
};

// W_role * e + b_role.
Pair role_part(const AffineCalibration& cal, Role role, std::span<const double> e) {
  const auto w = cal.weights(role);
  const auto b = cal.bias(role);
  const std::size_t d = cal.dim();
  double x0 = 0.0, x1 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    x0 += w[k] * e[k];
    x1 += w[d + k] * e[k];
  }
  return {x0 + b[0], x1 + b[1]};
}

Pair combine(Pair h, Pair r, Pair t) {
  return {(h.rho + r.rho) + t.rho, (h.lambda + r.lambda) + t.lambda};
}

void check_shapes(const AffineCalibration& cal, const EmbeddingScorer& features) {
  if (cal.dim() != features.dim()) {
    throw ValidationError("calibration dimension does not match embedding dimension");
  }
}

}  // namespace

std::pair<double, double> AffineCalibration::affine(const EmbeddingScorer& features,
                                                    EntityId s, RelationId r,
                                                    EntityId o) const {
  check_shapes(*this, features);
  const Pair p = combine(role_part(*this, Role::kHead, features.entity(s)),
                         role_part(*this, Role::kRelation, features.relation(r)),
                         role_part(*this, Role::kTail, features.entity(o)));
  return {p.rho, p.lambda};
}

double calibrated_confidence(double base, double rho, double lambda) {
  return clamp_confidence(base * (1.0 + rho) + lambda);
}

double calibrated_confidence(const EmbeddingScorer& base, const AffineCalibration& cal,
                             EntityId s, RelationId r, EntityId o) {
  const auto [rho, lambda] = cal.affine(base, s, r, o);
  return calibrated_confidence(base.score(s, r, o), rho, lambda);
}

CalibratedBackend::CalibratedBackend(const ConfidenceBackend& base,
                                     const EmbeddingScorer& features, AffineCalibration cal)
    : base_(&base), features_(&features), cal_(std::move(cal)) {
  check_shapes(cal_, features);
  if (features.num_entities() < base.num_entities() ||
      features.num_relations() < base.num_relations()) {
    throw ValidationError("embedding table smaller than the backend vocabulary");
  }
}

double CalibratedBackend::confidence(EntityId s, RelationId r, EntityId o) const {
  const auto [rho, lambda] = cal_.affine(*features_, s, r, o);
  return calibrated_confidence(base_->confidence(s, r, o), rho, lambda);
}

void to_json(nlohmann::json& j, const CalibrationHyper& h) {
  j = {{"learning_rate", h.learning_rate},
       {"epochs", h.epochs},
       {"batch_size", h.batch_size},
       {"seed", h.seed},
       {"budget", h.budget}};
}

void from_json(const nlohmann::json& j, CalibrationHyper& h) {
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.seed = j.value("seed", h.seed);
  h.budget = j.value("budget", h.budget);
}

namespace {

// Per-step tables of the role contributions and their gradient sinks.
class Tables {
 public:
  Tables(const AffineCalibration& cal, const EmbeddingScorer& features, std::size_t ne,
         std::size_t nr)
      : head_(ne), rel_(nr), tail_(ne), g_head_(ne), g_rel_(nr), g_tail_(ne) {
    for (EntityId e = 0; e < ne; ++e) {
      head_[e] = role_part(cal, Role::kHead, features.entity(e));
      tail_[e] = role_part(cal, Role::kTail, features.entity(e));
    }
    for (RelationId r = 0; r < nr; ++r) {
      rel_[r] = role_part(cal, Role::kRelation, features.relation(r));
    }
  }

  Pair affine(EntityId s, RelationId r, EntityId o) const {
    return combine(head_[s], rel_[r], tail_[o]);
  }

  void add_gradient(EntityId s, RelationId r, EntityId o, double d_rho, double d_lambda) {
    for (Pair* p : {&g_head_[s], &g_rel_[r], &g_tail_[o]}) {
      p->rho += d_rho;
      p->lambda += d_lambda;
    }
  }

  std::vector<double> gradient(const AffineCalibration& cal,
                               const EmbeddingScorer& features) const {
    const std::size_t d = cal.dim();
    const std::size_t block = AffineCalibration::block_size(d);
    std::vector<double> g(3 * block, 0.0);
    auto sink = [&](Role role, const Pair& gp, std::span<const double> e) {
      double* w = g.data() + static_cast<std::size_t>(role) * block;
      for (std::size_t k = 0; k < d; ++k) {
        w[k] += gp.rho * e[k];
        w[d + k] += gp.lambda * e[k];
      }
      w[2 * d] += gp.rho;
      w[2 * d + 1] += gp.lambda;
    };
    for (EntityId e = 0; e < g_head_.size(); ++e) {
      sink(Role::kHead, g_head_[e], features.entity(e));
      sink(Role::kTail, g_tail_[e], features.entity(e));
    }
    for (RelationId r = 0; r < g_rel_.size(); ++r) {
      sink(Role::kRelation, g_rel_[r], features.relation(r));
    }
    return g;
  }

 private:
  std::vector<Pair> head_, rel_, tail_;
  std::vector<Pair> g_head_, g_rel_, g_tail_;
};

struct GroundAtom {
  EntityId head;
  RelationId relation;
  EntityId tail;
  double p_hat;
  bool active;  // unclamped, so the gradient passes through
  double value;
  double slope;  // d value / d p_c
};

struct Evaluator {
  const ConfidenceBackend& base;
  const Tables& tables;

  GroundAtom ground(const SoftAtom& atom, EntityId h, EntityId t) const {
    GroundAtom g{h, atom.relation, t, base.confidence(h, atom.relation, t), false, 0.0,
                 atom.negated ? -atom.beta : atom.beta};
    const Pair a = tables.affine(h, atom.relation, t);
    const double raw = g.p_hat * (1.0 + a.rho) + a.lambda;
    g.active = raw >= 0.0 && raw <= 1.0;
    const double p = clamp_confidence(raw);
    g.value = atom_value(p, atom.alpha, atom.beta, atom.negated);
    return g;
  }
};

EntityId resolve(const Term& term, EntityId y, const std::vector<std::uint32_t>& existentials,
                 const std::vector<EntityId>& asg) {
  switch (term.kind) {
    case Term::Kind::kConstant:
      return term.id;
    case Term::Kind::kFree:
      return y;
    case Term::Kind::kExistential: {
      const auto it = std::find(existentials.begin(), existentials.end(), term.id);
      return asg[static_cast<std::size_t>(it - existentials.begin())];
    }
  }
  return 0;
}

double power(std::size_t base, std::size_t exp) {
  double n = 1.0;
  for (std::size_t i = 0; i < exp; ++i) n *= static_cast<double>(base);
  return n;
}

}  // namespace

LossAndGradient calibration_loss(const AffineCalibration& cal, const ConfidenceBackend& base,
                                 const EmbeddingScorer& features,
                                 std::span<const CalibrationExample> examples,
                                 std::uint64_t budget) {
  check_shapes(cal, features);
  const std::size_t ne = base.num_entities();
  const std::size_t nr = base.num_relations();
  if (features.num_entities() < ne || features.num_relations() < nr) {
    throw ValidationError("embedding table smaller than the backend vocabulary");
  }
  for (const auto& ex : examples) {
    for (const auto& conj : ex.query.disjuncts) {
      for (const auto& atom : conj.atoms) {
        if (atom.alpha != 0.0) throw ValidationError("calibration requires alpha = 0 atoms");
      }
    }
  }

  Tables tables(cal, features, ne, nr);
  const Evaluator eval{base, tables};
  LossAndGradient out;

  std::vector<GroundAtom> current, best;
  for (const auto& ex : examples) {
    double per_entity = 0.0;
    for (const auto& conj : ex.query.disjuncts) {
      per_entity += power(ne, conj.existentials.size());
    }
    if (per_entity * static_cast<double>(ex.truth.size()) > static_cast<double>(budget)) {
      throw BudgetExceeded("calibration query exceeds the enumeration budget");
    }

    for (const auto& [y, u] : ex.truth) {
      if (!(u > 0.0)) continue;
      double best_value = semiring::kZero;
      bool found = false;
      best.clear();
      for (const auto& conj : ex.query.disjuncts) {
        const std::size_t k = conj.existentials.size();
        std::vector<EntityId> asg(k, 0);
        while (true) {
          current.clear();
          double value = semiring::kOne;
          for (const auto& atom : conj.atoms) {
            const EntityId h = resolve(atom.head, y, conj.existentials, asg);
            const EntityId t = resolve(atom.tail, y, conj.existentials, asg);
            current.push_back(eval.ground(atom, h, t));
            value = semiring::otimes(value, current.back().value);
          }
          if (!found || value > best_value) {
            best_value = value;
            best = current;
            found = true;
          }
          std::size_t pos = 0;
          while (pos < k && ++asg[pos] == ne) asg[pos++] = 0;
          if (pos == k) break;
        }
      }
      if (semiring::is_zero(best_value)) continue;
      const double err = best_value - u;
      out.loss += err * err;
      ++out.terms;
      for (const GroundAtom& g : best) {
        if (!g.active) continue;
        // dp_c/drho = p_hat, dp_c/dlambda = 1.
        const double dp = 2.0 * err * g.slope;
        tables.add_gradient(g.head, g.relation, g.tail, dp * g.p_hat, dp);
      }
    }
  }
  out.gradient = tables.gradient(cal, features);
  return out;
}

AffineCalibration train_calibration(const ConfidenceBackend& base,
                                    const EmbeddingScorer& features,
                                    std::span<const CalibrationExample> examples,
                                    const CalibrationHyper& hyper,
                                    std::vector<double>* loss_history) {
  AffineCalibration cal(features.dim());
  const bool any_truth = std::any_of(examples.begin(), examples.end(), [](const auto& ex) {
    return std::any_of(ex.truth.begin(), ex.truth.end(),
                       [](const auto& t) { return t.second > 0.0; });
  });
  if (!any_truth) throw ValidationError("no training answers with positive utility");
  if (hyper.batch_size == 0) throw ValidationError("batch size must be > 0");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(hyper.seed, "calibration"));

  auto& theta = cal.parameters();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::size_t step = 0;

  if (loss_history) {
    loss_history->assign(1, calibration_loss(cal, base, features, examples, hyper.budget).loss);
  }
  std::vector<CalibrationExample> batch;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + hyper.batch_size); ++i) {
        batch.push_back(examples[order[i]]);
      }
      const auto lg = calibration_loss(cal, base, features, batch, hyper.budget);
      if (lg.terms == 0) continue;
      ++step;
      const double scale = 1.0 / static_cast<double>(lg.terms);
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double g = lg.gradient[j] * scale;
        m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g;
        v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g * g;
        theta[j] -= hyper.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + kEps);
      }
    }
    if (loss_history) {
      loss_history->push_back(calibration_loss(cal, base, features, examples, hyper.budget).loss);
    }
  }
  return cal;
}

void save_calibration(const AffineCalibration& cal, const std::filesystem::path& path,
                      const nlohmann::json& sidecar) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("SQAC", 4);
  detail::write_u32(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(cal.dim()));
  for (double v : cal.parameters()) detail::write_f64(out, v);
  detail::write_sidecar(path, sidecar);
}

AffineCalibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SQAC", 4) != 0) {
    throw FormatError("not a calibration checkpoint: " + path.string());
  }
  if (detail::read_u32(in) != 1) throw FormatError("unsupported calibration checkpoint version");
  AffineCalibration cal(detail::read_u32(in));
  for (double& v : cal.parameters()) v = detail::read_f64(in);
  return cal;
}

}  // namespace softq
