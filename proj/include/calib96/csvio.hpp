#pragma once

#include <string>
#include <vector>

#include "calib96/linalg.hpp"

namespace calib96 {

// Row-major CSV with a header line; values printed with 15 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Mat& data);

struct CsvTable {
  std::vector<std::string> header;
  Mat data;
};

CsvTable read_csv(const std::string& path);

std::string format_g15(double v);

}  // namespace calib96
