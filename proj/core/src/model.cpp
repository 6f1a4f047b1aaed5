#include "aggload/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "aggload/errors.hpp"

namespace aggload {

// ---- validation ----

void ModelParams::validate() const {
  basis.validate();
  const int c_total = num_classes();
  if (c_total == 0) throw InputError("params: no classes (empty gamma matrix)");
  if (gammas.cols() != basis.num_basis) {
    std::ostringstream msg;
    msg << "params: gamma matrix has " << gammas.cols() << " columns, basis has "
        << basis.num_basis;
    throw InputError(msg.str());
  }
  if (sigma_gamma_sq.size() != c_total)
    throw InputError("params: sigma_gamma_sq length does not match class count");
  for (Eigen::Index c = 0; c < sigma_gamma_sq.size(); ++c)
    if (!(sigma_gamma_sq(c) >= 0.0))
      throw InputError("params: sigma_gamma_sq must be nonnegative");
  if (!(sigma_sq >= 0.0)) throw InputError("params: sigma_sq must be nonnegative");
  for (const CountVector& m : counts) {
    if (static_cast<int>(m.size()) != c_total)
      throw InputError("params: count vector length does not match class count");
    for (long v : m)
      if (v < 0) throw InputError("params: negative class count");
  }
}

Eigen::VectorXd ModelParams::typology(int c, const DesignMatrix& design) const {
  if (c < 0 || c >= num_classes()) throw InputError("typology: class out of range");
  return design.values * gammas.row(c).transpose();
}

void TransformerData::validate() const {
  if (id.empty()) throw InputError("transformer data: empty id");
  if (y.rows() == 0 || y.cols() == 0)
    throw InputError("transformer '" + id + "': no readings");
  if (static_cast<Eigen::Index>(times.size()) != y.rows())
    throw InputError("transformer '" + id + "': time grid length does not match readings");
  if (reported.empty()) throw InputError("transformer '" + id + "': no reported counts");
  long total = 0;
  for (long v : reported) {
    if (v < 0) throw InputError("transformer '" + id + "': negative reported count");
    total += v;
  }
  if (total != num_consumers)
    throw InputError("transformer '" + id + "': consumer total does not match counts");
}

void validate_dataset(const std::vector<TransformerData>& data) {
  if (data.empty()) throw InputError("dataset: no transformers");
  for (const TransformerData& t : data) t.validate();
  const TransformerData& first = data.front();
  for (const TransformerData& t : data) {
    if (t.times != first.times)
      throw InputError("dataset: transformer '" + t.id + "' uses a different time grid");
    if (t.num_days() != first.num_days())
      throw InputError("dataset: transformer '" + t.id + "' has a different day count");
    if (t.reported.size() != first.reported.size())
      throw InputError("dataset: transformer '" + t.id + "' has a different class count");
  }
}

// ---- CSV helpers ----

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no,
                             const std::string& why) {
  std::ostringstream msg;
  msg << path << ":" << line_no << ": " << why;
  throw InputError(msg.str());
}

long parse_long(const std::string& s, const std::string& path, std::size_t line_no,
                const char* what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line_no, std::string("bad ") + what + " '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no,
                    const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line_no, std::string("bad ") + what + " '" + s + "'");
  }
}

struct RawSeries {
  // (day, time_index) -> (time_hours, value); kept ordered for validation.
  std::map<std::pair<long, long>, std::pair<double, double>> cells;
  std::size_t first_line = 0;
};

}  // namespace

// ---- load ----

std::vector<TransformerData> load_data(const std::string& readings_path,
                                       const std::string& counts_path) {
  std::ifstream in(readings_path);
  if (!in) throw InputError("cannot open readings file '" + readings_path + "'");

  std::map<std::string, RawSeries> series;
  std::vector<std::string> order;  // transformer ids by first appearance

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "transformer_id,day,time_index,time_hours,value_kva")
        parse_fail(readings_path, line_no,
                   "unexpected header, want "
                   "'transformer_id,day,time_index,time_hours,value_kva'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 5) parse_fail(readings_path, line_no, "expected 5 fields");
    const std::string& id = f[0];
    if (id.empty()) parse_fail(readings_path, line_no, "empty transformer_id");
    long day = parse_long(f[1], readings_path, line_no, "day");
    long idx = parse_long(f[2], readings_path, line_no, "time_index");
    double hours = parse_double(f[3], readings_path, line_no, "time_hours");
    double value = parse_double(f[4], readings_path, line_no, "value_kva");
    if (day < 1) parse_fail(readings_path, line_no, "day must be >= 1");
    if (idx < 1) parse_fail(readings_path, line_no, "time_index must be >= 1");

    auto [it, fresh] = series.try_emplace(id);
    if (fresh) {
      order.push_back(id);
      it->second.first_line = line_no;
    }
    auto [cell, inserted] = it->second.cells.try_emplace({day, idx}, hours, value);
    if (!inserted) parse_fail(readings_path, line_no, "duplicate (day, time_index) cell");
    (void)cell;
  }
  if (!header_seen) throw InputError(readings_path + ": empty file, no transformers");
  if (order.empty()) throw InputError(readings_path + ": no transformers");

  // Reported counts sidecar.
  std::ifstream cin_(counts_path);
  if (!cin_) throw InputError("cannot open counts file '" + counts_path + "'");
  std::map<std::string, std::map<long, long>> raw_counts;
  line_no = 0;
  header_seen = false;
  while (std::getline(cin_, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "transformer_id,class,reported_count")
        parse_fail(counts_path, line_no,
                   "unexpected header, want 'transformer_id,class,reported_count'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 3) parse_fail(counts_path, line_no, "expected 3 fields");
    long cls = parse_long(f[1], counts_path, line_no, "class");
    long count = parse_long(f[2], counts_path, line_no, "reported_count");
    if (cls < 1) parse_fail(counts_path, line_no, "class must be >= 1");
    if (count < 0) parse_fail(counts_path, line_no, "reported_count must be >= 0");
    if (!raw_counts[f[0]].emplace(cls, count).second)
      parse_fail(counts_path, line_no, "duplicate (transformer, class) entry");
  }
  if (!header_seen) throw InputError(counts_path + ": empty file");

  // Assemble, checking rectangular day x time layout per transformer.
  std::vector<TransformerData> out;
  out.reserve(order.size());
  std::vector<double> grid;  // shared grid from the first transformer
  for (const std::string& id : order) {
    const RawSeries& raw = series.at(id);
    long max_day = 0, max_idx = 0;
    for (const auto& [key, _] : raw.cells) {
      max_day = std::max(max_day, key.first);
      max_idx = std::max(max_idx, key.second);
    }
    if (static_cast<long>(raw.cells.size()) != max_day * max_idx) {
      std::ostringstream msg;
      msg << readings_path << ": transformer '" << id << "' (first seen at line "
          << raw.first_line << ") is missing cells: expected " << max_day * max_idx
          << " rows for " << max_day << " days x " << max_idx << " times, got "
          << raw.cells.size();
      throw InputError(msg.str());
    }

    TransformerData t;
    t.id = id;
    t.times.resize(max_idx);
    t.y.resize(max_idx, max_day);
    for (long idx = 1; idx <= max_idx; ++idx) {
      double hours = raw.cells.at({1, idx}).first;
      t.times[idx - 1] = hours;
      for (long day = 1; day <= max_day; ++day) {
        const auto& cell = raw.cells.at({day, idx});
        if (cell.first != hours) {
          std::ostringstream msg;
          msg << readings_path << ": transformer '" << id << "', day " << day
              << ", time_index " << idx << ": time_hours " << cell.first
              << " disagrees with day 1 (" << hours << ")";
          throw InputError(msg.str());
        }
        t.y(idx - 1, day - 1) = cell.second;
      }
    }

    auto rc = raw_counts.find(id);
    if (rc == raw_counts.end())
      throw InputError(counts_path + ": no reported counts for transformer '" + id + "'");
    long max_cls = rc->second.rbegin()->first;
    t.reported.assign(max_cls, 0);
    for (long cls = 1; cls <= max_cls; ++cls) {
      auto e = rc->second.find(cls);
      if (e == rc->second.end()) {
        std::ostringstream msg;
        msg << counts_path << ": transformer '" << id << "' is missing class " << cls;
        throw InputError(msg.str());
      }
      t.reported[cls - 1] = e->second;
    }
    t.num_consumers = 0;
    for (long v : t.reported) t.num_consumers += v;

    if (grid.empty()) grid = t.times;
    out.push_back(std::move(t));
  }

  validate_dataset(out);
  return out;
}

// ---- save ----

void save_data(const std::vector<TransformerData>& data,
               const std::string& readings_path, const std::string& counts_path,
               const std::string& manifest_comment) {
  validate_dataset(data);

  std::ofstream out(readings_path);
  if (!out) throw InputError("cannot write readings file '" + readings_path + "'");
  if (!manifest_comment.empty()) out << "# " << manifest_comment << "\n";
  out << "transformer_id,day,time_index,time_hours,value_kva\n";
  for (const TransformerData& t : data) {
    for (int day = 0; day < t.num_days(); ++day)
      for (int idx = 0; idx < t.num_times(); ++idx)
        out << t.id << ',' << day + 1 << ',' << idx + 1 << ','
            << format_double(t.times[idx]) << ',' << format_double(t.y(idx, day))
            << '\n';
  }
  if (!out) throw InputError("failed writing '" + readings_path + "'");

  std::ofstream cout_(counts_path);
  if (!cout_) throw InputError("cannot write counts file '" + counts_path + "'");
  if (!manifest_comment.empty()) cout_ << "# " << manifest_comment << "\n";
  cout_ << "transformer_id,class,reported_count\n";
  for (const TransformerData& t : data)
    for (std::size_t c = 0; c < t.reported.size(); ++c)
      cout_ << t.id << ',' << c + 1 << ',' << t.reported[c] << '\n';
  if (!cout_) throw InputError("failed writing '" + counts_path + "'");
}

}  // namespace aggload
