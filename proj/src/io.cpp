#include "dqm/io.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "json.hpp"

#include "dqm/errors.hpp"

namespace dqm {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

csv_writer::csv_writer(const std::vector<std::string>& header) : columns_(header.size()) {
  if (columns_ == 0) throw invalid_argument_error("csv_writer: empty header");
  append_line(header);
}

namespace {

bool needs_quoting(const std::string& cell) {
  return cell.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quoted(const std::string& cell) {
  std::string out = "\"";
  for (const char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void csv_writer::append_line(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) body_ += ',';
    body_ += needs_quoting(cells[i]) ? quoted(cells[i]) : cells[i];
  }
  body_ += "\r\n";
}

void csv_writer::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw invalid_argument_error("csv_writer: row width does not match the header");
  append_line(cells);
}

void csv_writer::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (const double v : values) cells.push_back(format_double(v));
  add_row(cells);
}

void csv_writer::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw invalid_argument_error("csv_writer: cannot open " + path);
  out.write(body_.data(), static_cast<std::streamsize>(body_.size()));
  if (!out) throw invalid_argument_error("csv_writer: short write to " + path);
}

void write_summary_json(const std::string& path, const std::string& scenario,
                        std::uint64_t seed,
                        const std::vector<std::pair<std::string, double>>& values,
                        const run_config& cfg) {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [key, value] : values) summary[key] = value;
  j["summary"] = summary;
  j["config"] = nlohmann::json::parse(serialize_config(cfg));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw invalid_argument_error("write_summary_json: cannot open " + path);
  const std::string text = j.dump(2) + "\n";
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw invalid_argument_error("write_summary_json: short write to " + path);
}

}  // namespace dqm
