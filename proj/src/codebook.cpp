#include "spanhash/codebook.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace spanhash::codebook {

void Codebook::add(const Code& c, const std::string& label, std::int64_t count) {
  if (c.width != k_)
    throw CodebookError("code width " + std::to_string(c.width) +
                        " does not match codebook K=" + std::to_string(k_));
  freq_[c.bits][label] += count;
  totals_[c.bits] += count;
}

void Codebook::finalize() {
  table_.clear();
  for (const auto& [bits, by_label] : freq_) {
    const std::string* best = nullptr;
    std::int64_t best_count = -1;
    for (const auto& [label, count] : by_label) {
      // std::map iterates labels in lexicographic order, so on ties the
      // smaller label wins by arriving first.
      if (count > best_count) {
        best = &label;
        best_count = count;
      }
    }
    table_[bits] = *best;
  }
}

const std::string& Codebook::translate(const Code& c) const {
  if (table_.empty()) throw EmptyCodebook("translate on an empty codebook");
  auto it = table_.find(c.bits);
  if (it != table_.end()) return it->second;

  fallback_uses_ += 1;
  const std::uint32_t* best = nullptr;
  int best_dist = 0;
  std::int64_t best_total = 0;
  for (const auto& [bits, label] : table_) {
    (void)label;
    int dist = std::popcount(bits ^ c.bits);
    std::int64_t tot = totals_.at(bits);
    bool better = best == nullptr || dist < best_dist ||
                  (dist == best_dist && tot > best_total) ||
                  (dist == best_dist && tot == best_total && bits < *best);
    if (better) {
      best = &bits;
      best_dist = dist;
      best_total = tot;
    }
  }
  return table_.at(*best);
}

std::int64_t Codebook::total(const Code& c) const {
  auto it = totals_.find(c.bits);
  return it == totals_.end() ? 0 : it->second;
}

std::vector<CoverageRow> Codebook::coverage_report() const {
  if (freq_.empty()) throw EmptyCodebook("coverage report on an empty codebook");
  // Invert to label -> (code, count).
  std::map<std::string, std::vector<std::pair<std::uint32_t, std::int64_t>>> by_label;
  for (const auto& [bits, labels] : freq_)
    for (const auto& [label, count] : labels) by_label[label].push_back({bits, count});

  std::vector<CoverageRow> rows;
  for (auto& [label, codes] : by_label) {
    std::int64_t total = 0;
    for (const auto& [bits, count] : codes) total += count;
    std::sort(codes.begin(), codes.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    double cumulative = 0.0;
    for (const auto& [bits, count] : codes) {
      double pct = 100.0 * static_cast<double>(count) / static_cast<double>(total);
      rows.push_back({label, Code(bits, k_), pct});
      cumulative += pct;
      if (cumulative >= 90.0) break;
    }
  }
  return rows;
}

void Codebook::save(const std::string& path) const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [bits, label] : table_) {
    Code c(bits, k_);
    j[c.bitstring()] = {{"label", label}, {"count", totals_.at(bits)}};
  }
  std::ofstream out(path);
  if (!out) throw CodebookError("cannot write codebook: " + path);
  out << j.dump(2) << "\n";
}

Codebook Codebook::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CodebookError("cannot open codebook: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.empty()) throw EmptyCodebook("codebook file has no entries: " + path);
  int k = static_cast<int>(j.begin().key().size());
  Codebook cb(k);
  for (auto it = j.begin(); it != j.end(); ++it) {
    Code c = Code::from_bitstring(it.key());
    if (c.width != k) throw CodebookError("inconsistent code widths in " + path);
    cb.add(c, it.value().at("label").get<std::string>(),
           it.value().at("count").get<std::int64_t>());
  }
  cb.finalize();
  return cb;
}

}  // namespace spanhash::codebook
