#include "softq/confidence.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "softq/error.hpp"

namespace softq {

double clamp_confidence(double p) {
  if (std::isnan(p)) return 0.0;
  return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

namespace {

std::vector<MatrixCell> apply_delta1(std::vector<MatrixCell> cells,
                                     std::optional<double> delta1) {
  if (delta1) {
    std::erase_if(cells, [&](const MatrixCell& c) { return c.value <= *delta1; });
  }
  return cells;
}

void check_relation(RelationId r, std::size_t num_relations) {
  if (r >= num_relations) throw ValidationError("relation index out of range");
}

}  // namespace

DefaultSparseMatrix ConfidenceBackend::relation_matrix(RelationId r,
                                                       std::optional<double> delta1) const {
  check_relation(r, num_relations());
  const std::size_t n = num_entities();
  std::vector<MatrixCell> cells;
  for (std::uint32_t s = 0; s < n; ++s) {
    for (std::uint32_t o = 0; o < n; ++o) {
      double p = confidence(s, r, o);
      if (delta1 && p <= *delta1) p = 0.0;
      if (p != 0.0) cells.push_back({s, o, p});
    }
  }
  return DefaultSparseMatrix(n, 0.0, std::move(cells));
}

ClosedWorldBackend::ClosedWorldBackend(const UncertainKG& kg, Split view)
    : kg_(&kg), view_(view), by_relation_(kg.num_relations()) {
  for (const Fact& f : kg.facts_in(view)) {
    if (f.confidence != 0.0) by_relation_[f.relation].push_back({f.head, f.tail, f.confidence});
  }
}

double ClosedWorldBackend::confidence(EntityId s, RelationId r, EntityId o) const {
  return kg_->confidence(view_, s, r, o);
}

DefaultSparseMatrix ClosedWorldBackend::relation_matrix(RelationId r,
                                                        std::optional<double> delta1) const {
  check_relation(r, num_relations());
  return DefaultSparseMatrix(num_entities(), 0.0, apply_delta1(by_relation_[r], delta1));
}

ClosedWorldBackend lookup_backend(const UncertainKG& kg, Split view) {
  return ClosedWorldBackend(kg, view);
}

TabularBackend::TabularBackend(const std::filesystem::path& scores, const UncertainKG& kg)
    : num_entities_(kg.num_entities()),
      num_relations_(kg.num_relations()),
      by_relation_(kg.num_relations()) {
  std::ifstream in(scores);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open", scores, std::make_error_code(std::errc::no_such_file_or_directory));
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 4) throw FormatError("expected 4 tab-separated fields", lineno);
    const auto h = kg.entities().find(fields[0]);
    const auto r = kg.relations().find(fields[1]);
    const auto t = kg.entities().find(fields[2]);
    if (!h || !t) throw FormatError("unknown entity in score file", lineno);
    if (!r) throw FormatError("unknown relation in score file", lineno);
    double p = 0.0;
    const char* first = fields[3].data();
    const char* last = first + fields[3].size();
    auto [ptr, ec] = std::from_chars(first, last, p);
    if (ec != std::errc() || ptr != last) throw FormatError("malformed score", lineno);
    if (!(p >= 0.0 && p <= 1.0)) throw FormatError("score out of range", lineno);
    if (!scores_.emplace(Triple{*h, *r, *t}, p).second) {
      throw FormatError("duplicate triple in score file", lineno);
    }
    if (p != 0.0) by_relation_[*r].push_back({*h, *t, p});
  }
}

double TabularBackend::confidence(EntityId s, RelationId r, EntityId o) const {
  if (s >= num_entities_ || o >= num_entities_ || r >= num_relations_) {
    throw ValidationError("triple index out of range");
  }
  if (auto it = scores_.find(Triple{s, r, o}); it != scores_.end()) return it->second;
  return 0.0;
}

DefaultSparseMatrix TabularBackend::relation_matrix(RelationId r,
                                                    std::optional<double> delta1) const {
  check_relation(r, num_relations_);
  return DefaultSparseMatrix(num_entities_, 0.0, apply_delta1(by_relation_[r], delta1));
}

TransformedBackend::TransformedBackend(const ConfidenceBackend& base,
                                       std::function<double(double)> f)
    : base_(&base), f_(std::move(f)) {}

double TransformedBackend::confidence(EntityId s, RelationId r, EntityId o) const {
  return clamp_confidence(f_(base_->confidence(s, r, o)));
}

DefaultSparseMatrix TransformedBackend::relation_matrix(RelationId r,
                                                        std::optional<double> delta1) const {
  auto m = base_->relation_matrix(r, std::nullopt)
               .map([&](double p) { return clamp_confidence(f_(p)); });
  if (!delta1) return m;
  return m.map([&](double p) { return p <= *delta1 ? 0.0 : p; });
}

}  // namespace softq
