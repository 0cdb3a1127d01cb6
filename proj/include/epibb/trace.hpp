#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace epibb {

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Newline-delimited trace: one JSON object per line (`.ndtrace`).
/// A failed write aborts the run; partial traces are not silently accepted.
class TraceWriter {
public:
    TraceWriter() = default;

    void open(const std::string& path) {
        out_.open(path, std::ios::trunc);
        if (!out_) {
            throw TraceError("cannot open trace sink: " + path);
        }
        enabled_ = true;
        path_ = path;
    }

    bool enabled() const { return enabled_; }
    std::uint64_t records() const { return records_; }

    void write(const nlohmann::json& record) {
        if (!enabled_) {
            return;
        }
        out_ << record.dump() << '\n';
        if (!out_) {
            throw TraceError("trace write failed: " + path_);
        }
        ++records_;
    }

    void close() {
        if (enabled_) {
            out_.flush();
            if (!out_) {
                throw TraceError("trace flush failed: " + path_);
            }
            out_.close();
            enabled_ = false;
        }
    }

private:
    std::ofstream out_;
    std::string path_;
    std::uint64_t records_ = 0;
    bool enabled_ = false;
};

}  // namespace epibb
