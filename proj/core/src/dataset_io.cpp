#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "scene/error.hpp"
#include "scene/io.hpp"

namespace scene::io {

namespace {

std::string row_error(std::size_t line, std::string_view detail) {
  return "row " + std::to_string(line) + ": " + std::string(detail);
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::parse, std::string(what) + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

long parse_long(std::string_view text, std::string_view what) {
  text = trim(text);
  long value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::parse, std::string(what) + ": cannot parse '" + std::string(text) + "' as an integer");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, "cannot rename onto " + path.string() + ": " + ec.message());
}

Dataset parse_dataset_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorKind::schema, "missing header");
  const auto header = split(lines[0], ',');
  if (header.size() < 2 || header[0] != "time" || header[1] != "event") {
    throw Error(ErrorKind::schema, "header must start with 'time,event'");
  }
  const std::size_t p = header.size() - 2;
  for (std::size_t j = 0; j < p; ++j) {
    if (header[j + 2] != "x" + std::to_string(j + 1)) {
      throw Error(ErrorKind::schema, "covariate column " + std::to_string(j + 1) + " must be named x" +
                                         std::to_string(j + 1));
    }
  }

  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<double> flat;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t line_no = k + 1;
    const auto fields = split(lines[k], ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::parse, row_error(line_no, "expected " + std::to_string(header.size()) +
                                                           " fields, got " + std::to_string(fields.size())));
    }
    double t = 0.0;
    try {
      t = parse_double(fields[0], "time");
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, row_error(line_no, e.what()));
    }
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorKind::parse, row_error(line_no, "time must be positive"));
    }
    if (fields[1] != "0" && fields[1] != "1") {
      throw Error(ErrorKind::parse, row_error(line_no, "event must be 0 or 1"));
    }
    times.push_back(t);
    events.push_back(fields[1] == "1" ? 1 : 0);
    for (std::size_t j = 0; j < p; ++j) {
      try {
        flat.push_back(parse_double(fields[j + 2], header[j + 2]));
      } catch (const Error& e) {
        throw Error(ErrorKind::parse, row_error(line_no, e.what()));
      }
    }
  }
  RowMatrix x(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = flat[static_cast<std::size_t>(i * x.cols() + j)];
  }
  return Dataset(std::move(times), std::move(events), std::move(x));
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "time,event";
  for (int j = 0; j < data.covariate_dim(); ++j) out += ",x" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += format_double(data.time(i));
    out += data.event(i) ? ",1" : ",0";
    for (double v : data.covariates(i)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset_csv(read_text(path));
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_text_atomic(path, dataset_to_csv(data));
}

Series parse_series_csv(std::string_view text, std::string_view expected_header) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != expected_header) {
    throw Error(ErrorKind::schema, "expected header '" + std::string(expected_header) + "'");
  }
  Series s;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto fields = split(lines[k], ',');
    if (fields.size() != 2) {
      throw Error(ErrorKind::parse, row_error(k + 1, "expected 2 fields"));
    }
    try {
      s.x.push_back(parse_double(fields[0], "column 1"));
      s.y.push_back(parse_double(fields[1], "column 2"));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, row_error(k + 1, e.what()));
    }
  }
  return s;
}

std::string series_to_csv(const Series& series, std::string_view header) {
  std::string out(header);
  out += '\n';
  for (std::size_t i = 0; i < series.x.size(); ++i) {
    out += format_double(series.x[i]);
    out += ',';
    out += format_double(series.y[i]);
    out += '\n';
  }
  return out;
}

}  // namespace scene::io
