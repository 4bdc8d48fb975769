#include "gapfrail/event_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gapfrail/latent.hpp"

namespace gapfrail {

std::size_t Dataset::interval_count() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

std::size_t Dataset::event_count() const {
  std::size_t n = 0;
  for (const auto& c : clusters)
    for (const auto& iv : c.intervals) n += iv.delta == 1;
  return n;
}

std::size_t Dataset::type2_count() const {
  std::size_t n = 0;
  for (const auto& c : clusters)
    for (const auto& iv : c.intervals) n += iv.delta_prev == 1;
  return n;
}

EtaAssignment make_eta(const Dataset& dataset, std::int8_t fill) {
  EtaAssignment eta(dataset.clusters.size());
  for (std::size_t c = 0; c < dataset.clusters.size(); ++c) {
    const auto& ivs = dataset.clusters[c].intervals;
    eta[c].resize(ivs.size());
    for (std::size_t k = 0; k < ivs.size(); ++k)
      eta[c][k] = ivs[k].delta_prev == 1 ? fill : kEtaUndefined;
  }
  return eta;
}

void derive_delta_prev(Dataset& dataset) {
  for (auto& c : dataset.clusters) {
    int prev = 0;
    for (auto& iv : c.intervals) {
      iv.delta_prev = prev;
      prev = iv.delta;
    }
  }
}

namespace {

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

}  // namespace

std::vector<Violation> validate(const Dataset& dataset) {
  std::vector<Violation> out;
  std::set<std::pair<std::string, std::string>> seen;
  const bool corner_layout = dataset.covariate_dim == 5;

  for (std::size_t c = 0; c < dataset.clusters.size(); ++c) {
    const auto& cl = dataset.clusters[c];
    if (!seen.emplace(cl.team_id, cl.game_id).second)
      out.push_back({c, 0, "duplicate (team_id, game_id) pair"});
    if (cl.intervals.empty()) {
      out.push_back({c, 0, "cluster must contain at least one interval"});
      continue;
    }
    bool dim_reported = false;
    for (std::size_t k = 0; k < cl.intervals.size(); ++k) {
      const auto& iv = cl.intervals[k];
      const std::size_t kk = k + 1;
      if (!(iv.y > 0.0) || !std::isfinite(iv.y)) out.push_back({c, kk, "y must be finite and > 0"});
      if (iv.delta != 0 && iv.delta != 1) out.push_back({c, kk, "delta must be 0 or 1"});
      if (iv.delta_prev != 0 && iv.delta_prev != 1)
        out.push_back({c, kk, "delta_prev must be 0 or 1"});
      if (k == 0 && iv.delta_prev != 0)
        out.push_back({c, kk, "first interval must have delta_prev=0"});
      if (k > 0 && iv.delta_prev != cl.intervals[k - 1].delta)
        out.push_back({c, kk, "delta_prev must equal delta of the previous interval"});
      if (iv.z.size() != dataset.covariate_dim) {
        if (!dim_reported) out.push_back({c, kk, "covariate dimension differs from dataset"});
        dim_reported = true;
        continue;
      }
      for (double v : iv.z)
        if (!std::isfinite(v)) {
          out.push_back({c, kk, "covariates must be finite"});
          break;
        }
      if (corner_layout) {
        if (iv.z[0] != 0.0 && iv.z[0] != 1.0) out.push_back({c, kk, "z1 must be 0 or 1"});
        if (iv.z[1] != 0.0 && iv.z[1] != 1.0) out.push_back({c, kk, "z2 must be 0 or 1"});
        if (!is_integer(iv.z[2])) out.push_back({c, kk, "z3 must be an integer"});
        if (!is_integer(iv.z[3])) out.push_back({c, kk, "z4 must be an integer"});
        if (!(iv.z[4] > 1.0)) out.push_back({c, kk, "z5 must be > 1"});
      }
    }
  }
  return out;
}

std::string describe(const Dataset& dataset, const Violation& v) {
  std::ostringstream os;
  if (v.cluster < dataset.clusters.size()) {
    const auto& cl = dataset.clusters[v.cluster];
    os << "cluster (" << cl.team_id << ", " << cl.game_id << ")";
  } else {
    os << "cluster #" << v.cluster;
  }
  if (v.interval > 0) os << " k=" << v.interval;
  os << ": " << v.rule;
  return os.str();
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_real(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(where + ": cannot parse '" + s + "' as a number");
  return v;
}

long long parse_int(const std::string& s, const std::string& where) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(where + ": cannot parse '" + s + "' as an integer");
  return v;
}

struct Row {
  long long k;
  IntervalObservation obs;
  std::optional<int> delta_prev;
  std::size_t line;
};

}  // namespace

Dataset parse_event_csv(const std::string& text, const std::string& source, bool check_rules) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    header = split_row(line);
    break;
  }
  if (header.empty()) throw DataError(source + ": missing header row");
  if (header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    header[0].erase(0, 3);

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second)
      throw DataError(source + ": duplicate column '" + header[i] + "'");
  }
  for (const char* name : {"team_id", "game_id", "k", "y", "delta"})
    if (!col.count(name)) throw DataError(source + ": missing column '" + std::string(name) + "'");

  std::size_t p = 0;
  while (col.count("z" + std::to_string(p + 1))) ++p;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'z' &&
        std::all_of(h.begin() + 1, h.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      auto idx = std::stoul(h.substr(1));
      if (idx == 0 || idx > p)
        throw DataError(source + ": covariate columns must be z1..zp without gaps (found '" + h + "')");
    }
  }
  const bool has_prev = col.count("delta_prev") > 0;

  // Clusters in order of first appearance.
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::pair<std::pair<std::string, std::string>, std::vector<Row>>> groups;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_row(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (f.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    Row r;
    r.line = line_no;
    r.k = parse_int(f[col["k"]], where);
    r.obs.y = parse_real(f[col["y"]], where);
    if (!(r.obs.y > 0.0) || !std::isfinite(r.obs.y))
      throw DataError(where + ": y must be finite and > 0 (got " + f[col["y"]] + ")");
    auto delta = parse_int(f[col["delta"]], where);
    if (delta != 0 && delta != 1) throw DataError(where + ": delta must be 0 or 1");
    r.obs.delta = static_cast<int>(delta);
    if (has_prev) {
      auto dp = parse_int(f[col["delta_prev"]], where);
      if (dp != 0 && dp != 1) throw DataError(where + ": delta_prev must be 0 or 1");
      r.delta_prev = static_cast<int>(dp);
    }
    r.obs.z.resize(p);
    for (std::size_t j = 0; j < p; ++j)
      r.obs.z[j] = parse_real(f[col["z" + std::to_string(j + 1)]], where);

    auto key = std::make_pair(f[col["team_id"]], f[col["game_id"]]);
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) groups.push_back({key, {}});
    groups[it->second].second.push_back(std::move(r));
  }
  if (groups.empty()) throw DataError(source + ": empty dataset");

  Dataset ds;
  ds.covariate_dim = p;
  ds.clusters.reserve(groups.size());
  for (auto& [key, rows] : groups) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.k < b.k; });
    GameCluster cl{key.first, key.second, {}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = source + ":" + std::to_string(rows[i].line);
      if (i > 0 && rows[i].k == rows[i - 1].k)
        throw DataError(where + ": duplicate (team_id, game_id, k) = (" + key.first + ", " +
                        key.second + ", " + std::to_string(rows[i].k) + ")");
      if (rows[i].k != static_cast<long long>(i + 1))
        throw DataError(where + ": k sequence of (" + key.first + ", " + key.second +
                        ") must run 1..n without gaps (found k=" + std::to_string(rows[i].k) +
                        ")");
      cl.intervals.push_back(rows[i].obs);
    }
    ds.clusters.push_back(std::move(cl));
  }
  derive_delta_prev(ds);

  if (has_prev) {
    for (auto& [key, rows] : groups)
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int derived = i == 0 ? 0 : rows[i - 1].obs.delta;
        if (*rows[i].delta_prev != derived)
          throw DataError(source + ":" + std::to_string(rows[i].line) +
                          ": delta_prev column disagrees with the delta sequence");
      }
  }

  if (!check_rules) return ds;
  auto violations = validate(ds);
  if (!violations.empty()) throw DataError(source + ": " + describe(ds, violations.front()));
  return ds;
}

Dataset load_event_csv(const std::filesystem::path& path, bool check_rules) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_event_csv(buf.str(), path.string(), check_rules);
}

std::string format_event_csv(const Dataset& dataset) {
  std::ostringstream os;
  os << "team_id,game_id,k,y,delta";
  for (std::size_t j = 0; j < dataset.covariate_dim; ++j) os << ",z" << j + 1;
  os << '\n';
  for (const auto& cl : dataset.clusters) {
    for (std::size_t k = 0; k < cl.intervals.size(); ++k) {
      const auto& iv = cl.intervals[k];
      os << cl.team_id << ',' << cl.game_id << ',' << k + 1 << ',' << format_double(iv.y) << ','
         << iv.delta;
      for (double v : iv.z) os << ',' << format_double(v);
      os << '\n';
    }
  }
  return os.str();
}

void write_event_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << format_event_csv(dataset);
}

}  // namespace gapfrail
