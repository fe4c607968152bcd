#include "softq/kg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "softq/error.hpp"
#include "softq/rng.hpp"

namespace softq {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "valid") return Split::kValid;
  if (text == "test") return Split::kTest;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::uint32_t Vocabulary::intern(std::string_view name) {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::uint32_t Vocabulary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ValidationError("unknown name '" + std::string(name) + "'");
}

const std::string& Vocabulary::name(std::uint32_t id) const {
  if (id >= names_.size()) throw ValidationError("index out of range: " + std::to_string(id));
  return names_[id];
}

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
  std::uint64_t h = splitmix64(t.head);
  h = splitmix64(h ^ t.relation);
  h = splitmix64(h ^ t.tail);
  return static_cast<std::size_t>(h);
}

double relation_percentile(const RelationStats& stats, double q) {
  if (stats.sorted.empty()) {
    throw ValidationError("empty confidence list for relation " +
                          std::to_string(stats.relation));
  }
  if (!(q >= 0.0 && q <= 100.0)) throw ValidationError("percentile outside [0, 100]");
  const auto n = static_cast<double>(stats.sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, stats.sorted.size());
  return stats.sorted[rank - 1];
}

UncertainKG::Builder& UncertainKG::Builder::add(std::string_view head,
                                                std::string_view relation,
                                                std::string_view tail, double confidence,
                                                Split split, std::size_t line) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw FormatError("confidence out of range", line);
  }
  const EntityId h = entities_.intern(head);
  const RelationId r = relations_.intern(relation);
  const EntityId t = entities_.intern(tail);
  const Triple key{h, r, t};
  auto& seen = seen_[static_cast<int>(split)];
  if (seen.contains(key)) {
    throw FormatError("duplicate fact (" + std::string(head) + ", " + std::string(relation) +
                          ", " + std::string(tail) + ") in " + std::string(to_string(split)),
                      line);
  }
  for (int earlier = 0; earlier < static_cast<int>(split); ++earlier) {
    if (auto it = seen_[earlier].find(key); it != seen_[earlier].end()) {
      if (facts_[it->second].confidence != confidence) {
        warnings_.push_back("fact (" + std::string(head) + ", " + std::string(relation) + ", " +
                            std::string(tail) + ") redefined in " +
                            std::string(to_string(split)) + " with a different confidence");
      }
    }
  }
  seen.emplace(key, facts_.size());
  facts_.push_back(Fact{h, r, t, confidence, split});
  return *this;
}

UncertainKG::Builder& UncertainKG::Builder::add_entity(std::string_view name) {
  entities_.intern(name);
  return *this;
}

UncertainKG::Builder& UncertainKG::Builder::add_relation(std::string_view name) {
  relations_.intern(name);
  return *this;
}

UncertainKG UncertainKG::Builder::build() && {
  if (facts_.empty()) throw FormatError("no facts");
  UncertainKG kg;
  kg.entities_ = std::move(entities_);
  kg.relations_ = std::move(relations_);
  kg.facts_ = std::move(facts_);
  kg.warnings_ = std::move(warnings_);
  // A fact from split k is visible in every view >= k; later files override.
  for (int view = 0; view < 3; ++view) {
    for (const Fact& f : kg.facts_) {
      if (static_cast<int>(f.split) <= view) {
        kg.views_[view][Triple{f.head, f.relation, f.tail}] = f.confidence;
      }
    }
  }
  kg.stats_.resize(kg.relations_.size());
  for (RelationId r = 0; r < kg.stats_.size(); ++r) kg.stats_[r].relation = r;
  for (const Fact& f : kg.facts_) {
    if (f.split == Split::kTrain) kg.stats_[f.relation].sorted.push_back(f.confidence);
  }
  for (auto& s : kg.stats_) std::sort(s.sorted.begin(), s.sorted.end());
  return kg;
}

std::vector<Fact> UncertainKG::facts_in(Split view) const {
  std::vector<Fact> out;
  const auto& map = views_[static_cast<int>(view)];
  std::unordered_map<Triple, bool, TripleHash> emitted;
  for (const Fact& f : facts_) {
    if (static_cast<int>(f.split) > static_cast<int>(view)) continue;
    const Triple key{f.head, f.relation, f.tail};
    if (emitted.contains(key)) continue;
    emitted.emplace(key, true);
    Fact g = f;
    g.confidence = map.at(key);
    out.push_back(g);
  }
  return out;
}

void UncertainKG::check_indices(EntityId s, RelationId r, EntityId o) const {
  if (s >= entities_.size() || o >= entities_.size() || r >= relations_.size()) {
    throw ValidationError("triple index out of range");
  }
}

double UncertainKG::confidence(Split view, EntityId s, RelationId r, EntityId o) const {
  check_indices(s, r, o);
  const auto& map = views_[static_cast<int>(view)];
  if (auto it = map.find(Triple{s, r, o}); it != map.end()) return it->second;
  return 0.0;
}

bool UncertainKG::contains(Split view, EntityId s, RelationId r, EntityId o) const {
  check_indices(s, r, o);
  return views_[static_cast<int>(view)].contains(Triple{s, r, o});
}

const RelationStats& UncertainKG::relation_stats(RelationId r) const {
  if (r >= stats_.size()) throw ValidationError("relation index out of range");
  return stats_[r];
}

namespace {

void read_tsv_into(UncertainKG::Builder& builder, const std::filesystem::path& path,
                   Split split) {
  std::ifstream in(path);
  if (!in) {
    throw std::filesystem::filesystem_error(
        "cannot open", path, std::make_error_code(std::errc::no_such_file_or_directory));
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest = line;
    std::string_view fields[4];
    for (int i = 0; i < 4; ++i) {
      const auto tab = rest.find('\t');
      if (i < 3) {
        if (tab == std::string_view::npos) throw FormatError("expected 4 tab-separated fields", lineno);
        fields[i] = rest.substr(0, tab);
        rest.remove_prefix(tab + 1);
      } else {
        if (tab != std::string_view::npos) throw FormatError("expected 4 tab-separated fields", lineno);
        fields[i] = rest;
      }
    }
    for (int i = 0; i < 3; ++i) {
      if (fields[i].empty()) throw FormatError("empty identifier", lineno);
    }
    double conf = 0.0;
    const auto* first = fields[3].data();
    const auto* last = first + fields[3].size();
    auto [ptr, ec] = std::from_chars(first, last, conf);
    if (ec != std::errc() || ptr != last || !std::isfinite(conf)) {
      throw FormatError("malformed confidence '" + std::string(fields[3]) + "'", lineno);
    }
    builder.add(fields[0], fields[1], fields[2], conf, split, lineno);
  }
}

}  // namespace

UncertainKG load_kg(const std::filesystem::path& path, Split split) {
  UncertainKG::Builder builder;
  read_tsv_into(builder, path, split);
  return std::move(builder).build();
}

UncertainKG load_kg_dir(const std::filesystem::path& dir) {
  UncertainKG::Builder builder;
  read_tsv_into(builder, dir / "train.tsv", Split::kTrain);
  read_tsv_into(builder, dir / "valid.tsv", Split::kValid);
  read_tsv_into(builder, dir / "test.tsv", Split::kTest);
  return std::move(builder).build();
}

}  // namespace softq
