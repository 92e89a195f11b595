#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dqm/config.hpp"

namespace dqm {

// shortest decimal form that parses back to the same double
std::string format_double(double value);

// RFC 4180 table builder: CRLF line endings, cells quoted only when they
// contain a delimiter, quote or line break. Row width is pinned by the header.
class csv_writer {
 public:
  explicit csv_writer(const std::vector<std::string>& header);

  void add_row(const std::vector<std::string>& cells);
  void add_row(const std::vector<double>& values);

  const std::string& str() const noexcept { return body_; }
  void write_file(const std::string& path) const;

 private:
  void append_line(const std::vector<std::string>& cells);
  std::size_t columns_;
  std::string body_;
};

// summary.json: scenario name, seed, a flat map of unit-suffixed scalars and
// the full configuration snapshot the run actually used.
void write_summary_json(const std::string& path, const std::string& scenario,
                        std::uint64_t seed,
                        const std::vector<std::pair<std::string, double>>& values,
                        const run_config& cfg);

}  // namespace dqm
