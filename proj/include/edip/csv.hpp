#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "edip/error.hpp"

namespace edip {

// Fixed formatting so repeated runs emit byte-identical files.
std::string csv_num(double v);
std::string csv_num(int64_t v);

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header) : f_(path) {
        if (!f_) throw IoError("cannot open for writing: " + path);
        f_ << header << "\n";
    }
    void row(std::initializer_list<std::string> cells) {
        bool first = true;
        for (const auto& c : cells) {
            if (!first) f_ << ",";
            f_ << c;
            first = false;
        }
        f_ << "\n";
    }

  private:
    std::ofstream f_;
};

// Whole-file reader; first row is the header. No quoting support (none of the
// emitted files need it).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace edip
