#include "evomem/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "evomem/errors.hpp"

namespace evomem {

void AllocationLedger::push_scope(std::string_view name) {
  if (closed_) throw UsageError("allocation ledger is closed");
  scopes_.emplace_back(name);
}

void AllocationLedger::pop_scope() {
  if (scopes_.empty()) throw UsageError("pop_scope on an empty scope stack");
  scopes_.pop_back();
}

std::string AllocationLedger::scope_prefix() const {
  std::string prefix;
  for (const std::string& s : scopes_) {
    prefix += s;
    prefix += '/';
  }
  return prefix;
}

std::string AllocationLedger::qualified(std::string_view label) const {
  return scope_prefix() + std::string(label);
}

void AllocationLedger::record(std::string_view label, std::int64_t bytes, EventKind kind) {
  if (closed_) throw UsageError("allocation ledger is closed");
  if (bytes < 0) throw ValidationError("allocation bytes must be non-negative");
  if (label.find('\t') != std::string_view::npos || label.find('\n') != std::string_view::npos) {
    throw ValidationError("allocation label must not contain tabs or newlines");
  }
  std::string full(label);
  if (kind == EventKind::Alloc) {
    outstanding_[full].push_back(bytes);
    live_ += bytes;
    peak_ = std::max(peak_, live_);
  } else {
    auto it = outstanding_.find(full);
    if (it == outstanding_.end() || it->second.empty()) {
      throw IntegrityError("free without a matching alloc for label '" + full + "'");
    }
    auto sz = std::find(it->second.begin(), it->second.end(), bytes);
    if (sz == it->second.end()) {
      throw IntegrityError("free of " + std::to_string(bytes) +
                           " bytes does not match any outstanding alloc for label '" + full + "'");
    }
    it->second.erase(sz);
    live_ -= bytes;
  }
  events_.push_back(Event{std::move(full), bytes, kind});
}

void AllocationLedger::record_alloc(std::string_view label, std::int64_t bytes) {
  record(qualified(label), bytes, EventKind::Alloc);
}

void AllocationLedger::record_free(std::string_view label, std::int64_t bytes) {
  record(qualified(label), bytes, EventKind::Free);
}

void AllocationLedger::record_alloc_absolute(std::string_view full_label, std::int64_t bytes) {
  record(full_label, bytes, EventKind::Alloc);
}

void AllocationLedger::record_free_absolute(std::string_view full_label, std::int64_t bytes) {
  record(full_label, bytes, EventKind::Free);
}

AllocationLedger::PeakReport AllocationLedger::measure_peak() const {
  PeakReport report;
  std::int64_t live = 0;
  std::int64_t peak = 0;
  std::size_t peak_index = 0;  // first event prefix achieving the peak
  for (std::size_t i = 0; i < events_.size(); ++i) {
    live += events_[i].kind == EventKind::Alloc ? events_[i].bytes : -events_[i].bytes;
    if (live > peak) {
      peak = live;
      peak_index = i;
    }
  }
  report.peak_bytes = peak;
  if (peak == 0) return report;

  // Replay to the first peak and attribute the live bytes by label.
  std::map<std::string, std::int64_t> live_by_label;
  for (std::size_t i = 0; i <= peak_index; ++i) {
    const Event& e = events_[i];
    live_by_label[e.label] += e.kind == EventKind::Alloc ? e.bytes : -e.bytes;
  }
  for (auto& [label, bytes] : live_by_label) {
    if (bytes != 0) report.breakdown.emplace(label, bytes);
  }
  return report;
}

std::int64_t AllocationLedger::peak_for_prefix(std::string_view prefix) const {
  std::int64_t live = 0;
  std::int64_t peak = 0;
  for (const Event& e : events_) {
    if (e.label.rfind(prefix, 0) != 0) continue;
    live += e.kind == EventKind::Alloc ? e.bytes : -e.bytes;
    peak = std::max(peak, live);
  }
  return peak;
}

void AllocationLedger::merge_concurrent(std::span<const AllocationLedger> units,
                                        std::string_view label) {
  std::vector<std::int64_t> peaks;
  peaks.reserve(units.size());
  for (const AllocationLedger& u : units) peaks.push_back(u.measure_peak().peak_bytes);
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    record_alloc(std::string(label) + "/unit" + std::to_string(k), peaks[k]);
  }
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    record_free(std::string(label) + "/unit" + std::to_string(k), peaks[k]);
  }
}

std::string AllocationLedger::serialize() const {
  std::ostringstream os;
  for (const Event& e : events_) {
    os << e.label << '\t' << (e.kind == EventKind::Alloc ? "alloc" : "free") << '\t' << e.bytes
       << '\n';
  }
  return os.str();
}

AllocationLedger AllocationLedger::deserialize(std::string_view text) {
  AllocationLedger ledger;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? std::string_view::npos
                                                        : line.find('\t', t1 + 1);
    if (t1 == std::string_view::npos || t2 == std::string_view::npos) {
      throw ValidationError("ledger line " + std::to_string(line_no) +
                            " is not label<TAB>kind<TAB>bytes");
    }
    const std::string_view label = line.substr(0, t1);
    const std::string_view kind = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string_view bytes_text = line.substr(t2 + 1);
    std::int64_t bytes = 0;
    const auto [ptr, ec] =
        std::from_chars(bytes_text.data(), bytes_text.data() + bytes_text.size(), bytes);
    if (ec != std::errc{} || ptr != bytes_text.data() + bytes_text.size()) {
      throw ValidationError("ledger line " + std::to_string(line_no) + " has a malformed byte count");
    }
    if (kind == "alloc") {
      ledger.record_alloc_absolute(label, bytes);
    } else if (kind == "free") {
      ledger.record_free_absolute(label, bytes);
    } else {
      throw ValidationError("ledger line " + std::to_string(line_no) +
                            " has unknown event kind '" + std::string(kind) + "'");
    }
  }
  return ledger;
}

ScopedAllocation::ScopedAllocation(AllocationLedger* ledger, std::string_view label,
                                   std::int64_t bytes)
    : ledger_(ledger), bytes_(bytes) {
  if (ledger_ == nullptr) return;
  label_ = ledger_->scope_prefix() + std::string(label);
  ledger_->record_alloc_absolute(label_, bytes_);
}

ScopedAllocation::~ScopedAllocation() {
  if (ledger_ == nullptr) return;
  ledger_->record_free_absolute(label_, bytes_);
}

}  // namespace evomem
