#pragma once

// Comma-separated output with 17 significant digits in lowercase scientific
// notation, so every double round-trips exactly.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phonolase {

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), cols_(header.size()) {
        for (std::size_t k = 0; k < header.size(); ++k) os_ << (k ? "," : "") << header[k];
        os_ << '\n';
    }

    // Fields are preformatted; the row must match the header width.
    void row(const std::vector<std::string>& fields) {
        if (fields.size() != cols_) throw std::logic_error("csv row width does not match header");
        for (std::size_t k = 0; k < fields.size(); ++k) os_ << (k ? "," : "") << fields[k];
        os_ << '\n';
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> f;
        f.reserve(values.size());
        for (double v : values) f.push_back(fmt17(v));
        row(f);
    }

private:
    std::ostream& os_;
    std::size_t cols_;
};

}  // namespace phonolase
