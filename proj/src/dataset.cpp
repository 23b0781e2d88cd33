#include "evreg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string_view>

#include "evreg/hash.hpp"
#include "evreg/textio.hpp"
#include "json.hpp"

namespace evreg {
namespace {

const char* const kFixedCols[7] = {"t_index", "row", "col", "lat",
                                   "lon",     "y",   "mask"};

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("dataset: " + msg);
}

long parse_int(std::string_view tok, long line, const char* col) {
  long v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    fail("line " + std::to_string(line) + ": column '" + col +
         "' is not an integer: '" + std::string(tok) + "'");
  return v;
}

double parse_num(std::string_view tok, long line, const std::string& col) {
  try {
    return parse_double(std::string(tok));
  } catch (const std::exception&) {
    fail("line " + std::to_string(line) + ": column '" + col +
         "' is not a number: '" + std::string(tok) + "'");
  }
}

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string serialize_table(const GridDataset& d) {
  std::string out;
  out.reserve(80 * (size_t)(d.n_cells() + 1));
  out += "t_index\trow\tcol\tlat\tlon\ty\tmask";
  for (const auto& name : d.predictor_names) {
    out += '\t';
    out += name;
  }
  out += '\n';
  const long n_sites = d.layout.n_sites();
  for (long k = 0; k < d.n_cells(); ++k) {
    const long t = k / n_sites, rem = k % n_sites;
    const long r = rem / d.layout.d2, c = rem % d.layout.d2;
    out += std::to_string(t);
    out += '\t';
    out += std::to_string(r);
    out += '\t';
    out += std::to_string(c);
    out += '\t';
    out += format_double(d.lat(rem));
    out += '\t';
    out += format_double(d.lon(rem));
    out += '\t';
    out += d.mask[(size_t)k] ? "na" : format_double(d.y(k));
    out += '\t';
    out += d.mask[(size_t)k] ? "1" : "0";
    for (int j = 0; j < d.X.cols(); ++j) {
      out += '\t';
      out += format_double(d.X(k, j));
    }
    out += '\n';
  }
  return out;
}

std::string serialize_meta(const GridDataset& d) {
  nlohmann::json j;
  j["d1"] = d.layout.d1;
  j["d2"] = d.layout.d2;
  j["n_times"] = d.layout.n_times;
  j["response_units"] = d.response_units;
  return j.dump(2) + "\n";
}

}  // namespace

Eigen::ArrayXXd GridDataset::site_coords() const {
  Eigen::ArrayXXd out(layout.n_sites(), 2);
  out.col(0) = lat;
  out.col(1) = lon;
  return out;
}

std::vector<int> GridDataset::observed_cells() const {
  std::vector<int> out;
  out.reserve(mask.size());
  for (size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) out.push_back((int)i);
  return out;
}

int GridDataset::predictor_index(const std::string& name) const {
  for (size_t j = 0; j < predictor_names.size(); ++j)
    if (predictor_names[j] == name) return (int)j;
  fail("unknown predictor '" + name + "'");
}

void GridDataset::validate() const {
  if (layout.d1 < 1 || layout.d2 < 1 || layout.n_times < 1)
    fail("grid dimensions must be positive");
  const long n_sites = layout.n_sites(), n = layout.n_cells();
  if (lat.size() != n_sites) fail("column 'lat' has wrong length");
  if (lon.size() != n_sites) fail("column 'lon' has wrong length");
  for (long s = 0; s < n_sites; ++s) {
    if (!(lat(s) >= -90.0 && lat(s) <= 90.0))
      fail("column 'lat' outside [-90, 90] at site " + std::to_string(s));
    if (!(lon(s) >= -180.0 && lon(s) <= 180.0))
      fail("column 'lon' outside [-180, 180] at site " + std::to_string(s));
  }
  if (y.size() != n) fail("column 'y' has wrong length");
  if ((long)mask.size() != n) fail("column 'mask' has wrong length");
  for (long k = 0; k < n; ++k) {
    if (mask[(size_t)k]) {
      if (!std::isnan(y(k)))
        fail("masked cell " + std::to_string(k) + " must hold NaN in 'y'");
    } else if (!std::isfinite(y(k))) {
      fail("unmasked cell " + std::to_string(k) + " has non-finite 'y'");
    }
  }
  if (X.rows() != n) fail("predictor matrix has wrong row count");
  if (X.cols() != (long)predictor_names.size())
    fail("predictor matrix width does not match the name list");
  std::set<std::string> seen;
  for (const auto& nm : predictor_names) {
    if (nm.empty() || nm.find_first_of(" \t\r\n") != std::string::npos)
      fail("bad predictor name '" + nm + "'");
    for (const char* fixed : kFixedCols)
      if (nm == fixed) fail("predictor name '" + nm + "' is reserved");
    if (!seen.insert(nm).second) fail("duplicate predictor name '" + nm + "'");
  }
  for (long j = 0; j < X.cols(); ++j)
    if (!X.col(j).isFinite().all())
      fail("predictor column '" + predictor_names[(size_t)j] +
           "' has non-finite entries");
}

void save_dataset(const std::string& path, const GridDataset& d) {
  d.validate();
  atomic_write_text(path, serialize_table(d));
  atomic_write_text(path + ".meta", serialize_meta(d));
}

std::string dataset_fingerprint(const GridDataset& d) {
  d.validate();
  std::uint64_t h = fnv1a64(serialize_table(d));
  h = fnv1a64(serialize_meta(d), h);
  return hex64(h);
}

GridDataset load_dataset(const std::string& path) {
  GridDataset d;
  {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_text_file(path + ".meta"));
    } catch (const nlohmann::json::exception& e) {
      fail("bad sidecar " + path + ".meta: " + e.what());
    }
    for (const char* key : {"d1", "d2", "n_times", "response_units"})
      if (!meta.contains(key))
        fail("sidecar missing field '" + std::string(key) + "'");
    d.layout.d1 = meta["d1"].get<int>();
    d.layout.d2 = meta["d2"].get<int>();
    d.layout.n_times = meta["n_times"].get<int>();
    d.response_units = meta["response_units"].get<std::string>();
  }
  if (d.layout.d1 < 1 || d.layout.d2 < 1 || d.layout.n_times < 1)
    fail("sidecar grid dimensions must be positive");

  const std::string text = read_text_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      size_t pos = rest.find('\n');
      if (pos == std::string_view::npos) {
        lines.push_back(rest);
        break;
      }
      lines.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
  }
  if (lines.empty()) fail("empty file: " + path);

  const auto header = split_tabs(lines[0]);
  for (int k = 0; k < 7; ++k)
    if ((size_t)k >= header.size() || header[(size_t)k] != kFixedCols[k])
      fail("missing column '" + std::string(kFixedCols[k]) + "'");
  for (size_t k = 7; k < header.size(); ++k)
    d.predictor_names.emplace_back(header[k]);
  const int n_pred = (int)d.predictor_names.size();

  const long n_sites = d.layout.n_sites(), n = d.layout.n_cells();
  if ((long)lines.size() != n + 1)
    fail("expected " + std::to_string(n) + " data rows, found " +
         std::to_string((long)lines.size() - 1));
  d.lat.resize(n_sites);
  d.lon.resize(n_sites);
  d.y.resize(n);
  d.mask.assign((size_t)n, false);
  d.X.resize(n, n_pred);

  for (long k = 0; k < n; ++k) {
    const long line_no = k + 2;
    const auto tok = split_tabs(lines[(size_t)(k + 1)]);
    if ((long)tok.size() != 7 + n_pred)
      fail("line " + std::to_string(line_no) + ": expected " +
           std::to_string(7 + n_pred) + " columns, found " +
           std::to_string(tok.size()));
    const long t = k / n_sites, rem = k % n_sites;
    const long r = rem / d.layout.d2, c = rem % d.layout.d2;
    if (parse_int(tok[0], line_no, "t_index") != t ||
        parse_int(tok[1], line_no, "row") != r ||
        parse_int(tok[2], line_no, "col") != c)
      fail("line " + std::to_string(line_no) +
           ": cells out of canonical order (expected t=" + std::to_string(t) +
           " row=" + std::to_string(r) + " col=" + std::to_string(c) + ")");
    const double la = parse_num(tok[3], line_no, "lat");
    const double lo = parse_num(tok[4], line_no, "lon");
    if (t == 0) {
      d.lat(rem) = la;
      d.lon(rem) = lo;
    } else if (la != d.lat(rem) || lo != d.lon(rem)) {
      fail("line " + std::to_string(line_no) +
           ": site coordinates differ across time");
    }
    if (tok[6] == "1") {
      d.mask[(size_t)k] = true;
      if (tok[5] != "na")
        fail("line " + std::to_string(line_no) +
             ": masked row must carry y = na");
      d.y(k) = std::numeric_limits<double>::quiet_NaN();
    } else if (tok[6] == "0") {
      d.y(k) = parse_num(tok[5], line_no, "y");
    } else {
      fail("line " + std::to_string(line_no) + ": column 'mask' must be 0/1");
    }
    for (int j = 0; j < n_pred; ++j)
      d.X(k, j) =
          parse_num(tok[(size_t)(7 + j)], line_no, d.predictor_names[(size_t)j]);
  }
  d.validate();
  return d;
}

}  // namespace evreg
