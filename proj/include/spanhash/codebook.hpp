#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanhash/code.hpp"

namespace spanhash::codebook {

struct CodebookError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyCodebook : CodebookError {
  using CodebookError::CodebookError;
};

struct CoverageRow {
  std::string label;
  Code code;
  double percent = 0.0;  // share of the label's occurrences
};

// Frequency map over (code, gold label) pairs with an argmax translation
// table. Ties in the argmax break toward the lexicographically smaller label.
class Codebook {
 public:
  explicit Codebook(int k) : k_(k) {}

  void add(const Code& c, const std::string& label, std::int64_t count = 1);

  // Rebuilds the argmax table; call after counting.
  void finalize();

  // Seen codes map through the table; unseen codes fall back to the nearest
  // seen code by Hamming distance (ties: higher total frequency, then
  // lexicographically smaller code). Fallback uses are tallied.
  const std::string& translate(const Code& c) const;

  // Per label, codes by descending frequency until cumulative coverage
  // reaches 90%; labels in lexicographic order.
  std::vector<CoverageRow> coverage_report() const;

  std::int64_t fallback_uses() const { return fallback_uses_; }
  bool empty() const { return totals_.empty(); }
  int k() const { return k_; }
  std::int64_t total(const Code& c) const;
  const std::map<std::uint32_t, std::map<std::string, std::int64_t>>& freq() const {
    return freq_;
  }
  const std::map<std::uint32_t, std::string>& table() const { return table_; }

  // JSON map bitstring -> {"label": argmax label, "count": total occurrences
  // of the code}. Loading restores translation (table + totals) but not the
  // full per-label frequency map.
  void save(const std::string& path) const;
  static Codebook load(const std::string& path);

 private:
  int k_;
  std::map<std::uint32_t, std::map<std::string, std::int64_t>> freq_;
  std::map<std::uint32_t, std::int64_t> totals_;
  std::map<std::uint32_t, std::string> table_;
  mutable std::int64_t fallback_uses_ = 0;
};

}  // namespace spanhash::codebook
