#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pathint/errors.hpp"

namespace pathint {

/// Shortest round-trip decimal form; locale-independent. Keeps results.csv
/// byte-identical across replays.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ",";
            out_ << header[i];
        }
        out_ << "\n";
    }

    CsvWriter& field(const std::string& s) {
        if (in_row_) out_ << ",";
        out_ << s;
        in_row_ = true;
        ++fields_;
        return *this;
    }
    CsvWriter& field(double v) { return field(format_double(v)); }
    CsvWriter& field(long long v) { return field(std::to_string(v)); }
    CsvWriter& field(int v) { return field(std::to_string(v)); }
    CsvWriter& field(std::uint64_t v) { return field(std::to_string(v)); }

    void end_row() {
        if (fields_ != cols_)
            throw UsageError("csv row has " + std::to_string(fields_) + " fields, expected " +
                             std::to_string(cols_));
        out_ << "\n";
        in_row_ = false;
        fields_ = 0;
    }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
    size_t cols_;
    size_t fields_ = 0;
    bool in_row_ = false;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f << content;
    if (!f) throw Error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace pathint
