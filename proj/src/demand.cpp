// Copyright 2026 The relief-optim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "relief/demand.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "relief/error.hpp"

namespace relief {

EventSequence::EventSequence(int num_types, double t_minus)
    : num_types_(num_types), t_minus_(t_minus) {
  if (num_types < 1) throw ValidationError("type count must be >= 1");
}

double EventSequence::t_end() const {
  if (t_end_) return *t_end_;
  return events_.empty() ? t_minus_ : events_.back().time;
}

void EventSequence::push_back(DemandEvent e) {
  if (static_cast<int>(e.quantities.size()) != num_types_) {
    throw ValidationError("event has " + std::to_string(e.quantities.size()) +
                          " quantities, expected " +
                          std::to_string(num_types_));
  }
  if (!std::isfinite(e.time) || e.time < t_minus_) {
    throw ValidationError("event time before T_minus or not finite");
  }
  if (!events_.empty() && e.time < events_.back().time) {
    throw ValidationError("event times must be non-decreasing");
  }
  bool any = false;
  for (int q : e.quantities) {
    if (q < 0) throw ValidationError("negative quantity");
    any |= q > 0;
  }
  if (!any) throw ValidationError("event has no positive quantity");
  events_.push_back(std::move(e));
}

EventSequence EventSequence::window(double lo, double hi) const {
  EventSequence out(num_types_, t_minus_);
  for (const auto& e : events_) {
    if (e.time > lo && e.time <= hi) out.events_.push_back(e);
  }
  return out;
}

EventSequence EventSequence::prefix(double t) const {
  EventSequence out(num_types_, t_minus_);
  for (const auto& e : events_) {
    if (e.time <= t) out.events_.push_back(e);
  }
  out.t_end_ = t;
  return out;
}

void AgencyState::validate() const {
  const std::size_t K = R.size();
  if (K == 0) throw ValidationError("state has no resource types");
  if (U.size() != K || w.size() != K || c.size() != K || xi.size() != K) {
    throw ValidationError("state vectors disagree on the type count");
  }
  if (!(W > 0)) throw ValidationError("capacity W must be positive");
  if (!(T_plus >= T)) throw ValidationError("T_plus must not precede T");
  for (std::size_t k = 0; k < K; ++k) {
    if (R[k] < 0 || U[k] < 0) throw ValidationError("negative R or U");
    if (R[k] > 0 && U[k] > 0) throw ValidationError("R_k and U_k both > 0");
    if (!(w[k] > 0)) throw ValidationError("weights must be positive");
    if (!(c[k] > 1)) throw ValidationError("importance scores must exceed 1");
    if (!(xi[k] > T_plus)) throw ValidationError("xi_k must exceed T_plus");
  }
  if (!unmet.empty()) {
    if (unmet.size() != K) throw ValidationError("unmet blocks width");
    for (std::size_t k = 0; k < K; ++k) {
      int s = 0;
      for (const auto& b : unmet[k]) s += b.quantity;
      if (s != U[k]) throw ValidationError("unmet blocks do not sum to U");
    }
  }
}

int NetDemandSeq::total() const {
  int s = 0;
  for (const auto& e : entries) s += e.quantity;
  return s;
}

FifoLedger::FifoLedger(int num_types)
    : stock_(num_types, 0), backlog_(num_types) {}

FifoLedger::FifoLedger(int num_types, const std::vector<int>& initial_stock)
    : FifoLedger(num_types) {
  if (static_cast<int>(initial_stock.size()) != num_types) {
    throw ValidationError("initial stock width mismatch");
  }
  stock_ = initial_stock;
}

void FifoLedger::demand(const DemandEvent& e) {
  for (int k = 0; k < num_types(); ++k) {
    int q = e.quantities[k];
    if (q <= 0) continue;
    int served = 0;
    // Stock is only positive when the backlog is empty.
    if (backlog_[k].empty()) {
      served = std::min(q, stock_[k]);
      stock_[k] -= served;
    }
    if (served > 0) fulfilled_.push_back({k, e.time, e.time, served});
    if (q > served) backlog_[k].push_back({e.time, q - served});
  }
}

void FifoLedger::arrival(double time, const std::vector<int>& units) {
  for (int k = 0; k < num_types(); ++k) {
    stock_[k] += units[k];
    auto& queue = backlog_[k];
    std::size_t i = 0;
    while (i < queue.size() && stock_[k] > 0) {
      int take = std::min(stock_[k], queue[i].quantity);
      fulfilled_.push_back({k, queue[i].time, time, take});
      stock_[k] -= take;
      queue[i].quantity -= take;
      if (queue[i].quantity == 0) ++i;
    }
    queue.erase(queue.begin(), queue.begin() + static_cast<long>(i));
  }
}

std::vector<int> FifoLedger::backlog_totals() const {
  std::vector<int> u(num_types(), 0);
  for (int k = 0; k < num_types(); ++k) {
    for (const auto& b : backlog_[k]) u[k] += b.quantity;
  }
  return u;
}

AgencyState compute_state(const EventSequence& seq,
                          const std::vector<int>& initial_stock, double T) {
  FifoLedger ledger(seq.num_types(), initial_stock);
  for (const auto& e : seq.events()) {
    if (e.time > T) break;
    ledger.demand(e);
  }
  AgencyState s;
  s.T = T;
  s.T_plus = T;
  s.R = ledger.stock();
  s.U = ledger.backlog_totals();
  s.unmet = ledger.backlog();
  return s;
}

std::vector<NetDemandSeq> build_net_demand(const AgencyState& state,
                                           const EventSequence& future) {
  const int K = state.num_types();
  std::vector<NetDemandSeq> out(K);
  for (int k = 0; k < K; ++k) {
    auto& entries = out[k].entries;
    if (state.U[k] > 0) {
      if (!state.unmet.empty() && !state.unmet[k].empty()) {
        for (const auto& b : state.unmet[k]) {
          if (b.quantity > 0) entries.push_back(b);
        }
      } else {
        entries.push_back({state.T, state.U[k]});
      }
    }
    int offset = state.R[k];
    for (const auto& e : future.events()) {
      int q = e.quantities[k];
      if (q <= 0) continue;
      int used = std::min(offset, q);
      offset -= used;
      if (q > used) entries.push_back({e.time, q - used});
    }
  }
  return out;
}

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(Trim(line.substr(start)));
      return out;
    }
    out.push_back(Trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool ParseDouble(std::string_view s, double* out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() &&
         std::isfinite(*out);
}

bool ParseInt(std::string_view s, long long* out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// RFC 3339 subset: YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|+HH:MM|-HH:MM].
bool ParseWallClock(std::string_view s, double* seconds) {
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' ||
      (s[10] != 'T' && s[10] != ' ' && s[10] != 't') || s[13] != ':' ||
      s[16] != ':') {
    return false;
  }
  long long y, mo, d, h, mi;
  double sec;
  if (!ParseInt(s.substr(0, 4), &y) || !ParseInt(s.substr(5, 2), &mo) ||
      !ParseInt(s.substr(8, 2), &d) || !ParseInt(s.substr(11, 2), &h) ||
      !ParseInt(s.substr(14, 2), &mi)) {
    return false;
  }
  std::size_t end = 19;
  while (end < s.size() && (s[end] == '.' || (s[end] >= '0' && s[end] <= '9')))
    ++end;
  if (!ParseDouble(s.substr(17, end - 17), &sec)) return false;
  double offset = 0.0;
  std::string_view zone = s.substr(end);
  if (zone == "Z" || zone == "z" || zone.empty()) {
    offset = 0.0;
  } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') &&
             zone[3] == ':') {
    long long zh, zm;
    if (!ParseInt(zone.substr(1, 2), &zh) || !ParseInt(zone.substr(4, 2), &zm))
      return false;
    offset = (zone[0] == '+' ? 1.0 : -1.0) * (zh * 3600.0 + zm * 60.0);
  } else {
    return false;
  }
  using namespace std::chrono;
  year_month_day ymd{year{static_cast<int>(y)},
                     month{static_cast<unsigned>(mo)},
                     day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec >= 61.0) return false;
  auto days = sys_days{ymd}.time_since_epoch().count();
  *seconds = days * 86400.0 + h * 3600.0 + mi * 60.0 + sec - offset;
  return true;
}

struct RawRow {
  bool wall_clock = false;
  double value = 0.0;  // hours, or epoch seconds when wall_clock
  std::vector<int> q;
  int line = 0;
};

EventSequence Assemble(std::vector<RawRow> rows, int K,
                       const ParseOptions& opts) {
  bool any_wall = false;
  double min_wall = 0.0;
  for (const auto& r : rows) {
    if (!r.wall_clock) continue;
    min_wall = any_wall ? std::min(min_wall, r.value) : r.value;
    any_wall = true;
  }
  double epoch = 0.0;
  if (any_wall) {
    epoch = opts.epoch_seconds
                ? static_cast<double>(*opts.epoch_seconds)
                : std::floor(min_wall / 86400.0) * 86400.0;
  }
  std::vector<DemandEvent> events;
  events.reserve(rows.size());
  for (auto& r : rows) {
    double t = r.wall_clock ? (r.value - epoch) / 3600.0 : r.value;
    if (t < 0) throw ValidationError("line " + std::to_string(r.line) +
                                     ": time precedes the epoch");
    events.push_back({t, std::move(r.q)});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const DemandEvent& a, const DemandEvent& b) {
                     return a.time < b.time;
                   });
  EventSequence seq(K);
  for (auto& e : events) {
    bool any = false;
    for (int q : e.quantities) any |= q > 0;
    if (!any) continue;  // a row that requests nothing is not a demand
    seq.push_back(std::move(e));
  }
  return seq;
}

EventSequence ParseCsv(std::string_view bytes, int K,
                       const ParseOptions& opts) {
  std::vector<RawRow> rows;
  int line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    std::string_view line = bytes.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? bytes.size() + 1 : nl + 1;
    ++line_no;
    line = Trim(line);
    if (line.empty()) continue;
    auto fields = SplitCommas(line);
    if (!header_seen) {
      header_seen = true;
      if (static_cast<int>(fields.size()) != K + 1 || fields[0] != "time") {
        throw ParseError("expected header time,q1..q" + std::to_string(K),
                         line_no);
      }
      continue;
    }
    if (static_cast<int>(fields.size()) != K + 1) {
      throw ParseError("expected " + std::to_string(K + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    RawRow row;
    row.line = line_no;
    if (ParseDouble(fields[0], &row.value)) {
      if (row.value < 0) {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": negative time");
      }
    } else if (ParseWallClock(fields[0], &row.value)) {
      row.wall_clock = true;
    } else {
      throw ParseError("unparseable time '" + std::string(fields[0]) + "'",
                       line_no);
    }
    for (int k = 0; k < K; ++k) {
      long long q;
      if (!ParseInt(fields[k + 1], &q)) {
        throw ParseError("unparseable quantity '" +
                             std::string(fields[k + 1]) + "'",
                         line_no);
      }
      if (q < 0) {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": negative quantity");
      }
      if (q > 1000000000LL) throw ParseError("quantity too large", line_no);
      row.q.push_back(static_cast<int>(q));
    }
    rows.push_back(std::move(row));
  }
  return Assemble(std::move(rows), K, opts);
}

EventSequence ParseJson(std::string_view bytes, int K,
                        const ParseOptions& opts) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!doc.is_array()) throw ParseError("expected a JSON array of events");
  std::vector<RawRow> rows;
  int idx = 0;
  for (const auto& item : doc) {
    ++idx;
    RawRow row;
    row.line = idx;
    if (!item.is_object() || !item.contains("time") || !item.contains("q")) {
      throw ParseError("entry needs time and q", idx);
    }
    const auto& t = item["time"];
    if (t.is_number()) {
      row.value = t.get<double>();
      if (row.value < 0) throw ValidationError("negative time");
    } else if (t.is_string() &&
               ParseWallClock(t.get<std::string>(), &row.value)) {
      row.wall_clock = true;
    } else {
      throw ParseError("bad time", idx);
    }
    const auto& q = item["q"];
    if (!q.is_array() || static_cast<int>(q.size()) != K) {
      throw ParseError("q must have " + std::to_string(K) + " entries", idx);
    }
    for (const auto& v : q) {
      if (!v.is_number_integer()) throw ParseError("q must be integers", idx);
      long long n = v.get<long long>();
      if (n < 0) throw ValidationError("negative quantity");
      row.q.push_back(static_cast<int>(n));
    }
    rows.push_back(std::move(row));
  }
  return Assemble(std::move(rows), K, opts);
}

bool LooksLikeJson(std::string_view bytes) {
  bytes = Trim(bytes);
  return !bytes.empty() && bytes.front() == '[';
}

}  // namespace

EventSequence parse_demand_file(std::string_view bytes, int K,
                                const ParseOptions& opts) {
  if (K < 1) throw ValidationError("K must be >= 1");
  if (LooksLikeJson(bytes)) return ParseJson(bytes, K, opts);
  return ParseCsv(bytes, K, opts);
}

std::string write_demand_file(const EventSequence& seq) {
  std::string out = "time";
  for (int k = 1; k <= seq.num_types(); ++k) out += ",q" + std::to_string(k);
  out += '\n';
  char buf[64];
  for (const auto& e : seq.events()) {
    // Shortest round-trip representation; never loses precision.
    auto res = std::to_chars(buf, buf + sizeof(buf), e.time);
    out.append(buf, res.ptr);
    for (int q : e.quantities) {
      out += ',';
      out += std::to_string(q);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

EventSequence read_demand_path(const std::string& path, int K) {
  return parse_demand_file(Slurp(path), K);
}

EventSequence read_demand_path(const std::string& path) {
  std::string bytes = Slurp(path);
  int K = 0;
  if (LooksLikeJson(bytes)) {
    auto doc = nlohmann::json::parse(bytes, nullptr, false);
    if (doc.is_discarded() || !doc.is_array() || doc.empty() ||
        !doc[0].contains("q")) {
      throw ParseError("cannot infer type count from JSON demand file");
    }
    K = static_cast<int>(doc[0]["q"].size());
  } else {
    std::string_view v(bytes);
    auto nl = v.find('\n');
    auto fields = SplitCommas(Trim(v.substr(0, nl)));
    K = static_cast<int>(fields.size()) - 1;
  }
  if (K < 1) throw ParseError("cannot infer type count", 1);
  return parse_demand_file(bytes, K);
}

}  // namespace relief
