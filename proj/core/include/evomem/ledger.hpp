#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evomem {

// Event log of named allocations and frees for one execution. Tracks current
// live bytes and the running peak; measure_peak() recomputes the peak from
// the event prefix sums and attributes the live bytes at the first time the
// peak is reached to their labels.
//
// Bytes are logical: callers record the emulated-format footprint of a
// buffer, not the host allocation behind it. A ledger belongs to one
// execution and is not thread safe; concurrent work units report through
// per-unit sub-ledgers merged by the owner (merge_concurrent), which models
// simultaneously live units by summing their peaks.
class AllocationLedger {
 public:
  enum class EventKind { Alloc, Free };

  struct Event {
    std::string label;
    std::int64_t bytes;
    EventKind kind;
  };

  AllocationLedger() = default;

  // Scope labels prefix subsequent event labels ("tiled" + "work/acc" gives
  // "tiled/work/acc"); used for per-module attribution.
  void push_scope(std::string_view name);
  void pop_scope();

  void record_alloc(std::string_view label, std::int64_t bytes);
  // Every free must match a prior alloc of equal size under the same label;
  // anything else throws IntegrityError naming the label.
  void record_free(std::string_view label, std::int64_t bytes);

  // As above but bypassing scope qualification; used when the fully
  // qualified label was captured earlier (RAII guards outliving a scope).
  void record_alloc_absolute(std::string_view full_label, std::int64_t bytes);
  void record_free_absolute(std::string_view full_label, std::int64_t bytes);

  std::string scope_prefix() const;  // "a/b/" or ""

  std::int64_t live_bytes() const { return live_; }
  std::int64_t peak_bytes() const { return peak_; }
  const std::vector<Event>& events() const { return events_; }

  struct PeakReport {
    std::int64_t peak_bytes = 0;
    // Live bytes per label at the first event prefix where the peak holds.
    std::map<std::string, std::int64_t> breakdown;
  };
  PeakReport measure_peak() const;

  // Peak of the prefix-sum restricted to events whose label starts with
  // `prefix`; isolates one module's contribution.
  std::int64_t peak_for_prefix(std::string_view prefix) const;

  // Models `units` executing concurrently at the merge point: each unit
  // contributes its own peak simultaneously (sum over concurrently live
  // allocations). Unit events are folded into one alloc/free pair labelled
  // "<label>/unit<k>".
  void merge_concurrent(std::span<const AllocationLedger> units, std::string_view label);

  // A closed ledger rejects further events with UsageError.
  void close() { closed_ = true; }
  bool closed() const { return closed_; }

  // One event per line: label<TAB>alloc|free<TAB>bytes
  std::string serialize() const;
  static AllocationLedger deserialize(std::string_view text);

 private:
  void record(std::string_view label, std::int64_t bytes, EventKind kind);
  std::string qualified(std::string_view label) const;

  std::vector<Event> events_;
  std::vector<std::string> scopes_;
  std::map<std::string, std::vector<std::int64_t>> outstanding_;
  std::int64_t live_ = 0;
  std::int64_t peak_ = 0;
  bool closed_ = false;
};

// RAII scope label.
class LedgerScope {
 public:
  LedgerScope(AllocationLedger& ledger, std::string_view name) : ledger_(ledger) {
    ledger_.push_scope(name);
  }
  ~LedgerScope() { ledger_.pop_scope(); }
  LedgerScope(const LedgerScope&) = delete;
  LedgerScope& operator=(const LedgerScope&) = delete;

 private:
  AllocationLedger& ledger_;
};

// RAII allocation record; tolerates a null ledger so instrumentation can be
// optional at call sites.
class ScopedAllocation {
 public:
  ScopedAllocation(AllocationLedger* ledger, std::string_view label, std::int64_t bytes);
  ~ScopedAllocation();
  ScopedAllocation(const ScopedAllocation&) = delete;
  ScopedAllocation& operator=(const ScopedAllocation&) = delete;

 private:
  AllocationLedger* ledger_;
  std::string label_;
  std::int64_t bytes_;
};

}  // namespace evomem
