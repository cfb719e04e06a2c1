#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "scamp/design.hpp"
#include "scamp/errors.hpp"
#include "scamp/model.hpp"

namespace scamp {

using Json = nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes `content` to path.tmp and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Round-trip formatting; NaN prints as "nan".
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// In-memory CSV table with a fixed header.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_.size(); }

    class Row {
    public:
        Row& add(const std::string& s) {
            cells_.push_back(s);
            return *this;
        }
        Row& add(const char* s) { return add(std::string(s)); }
        Row& add(double v) { return add(format_number(v)); }
        Row& add(long long v) { return add(std::to_string(v)); }
        Row& add(int v) { return add(std::to_string(v)); }
        Row& add(Index v) { return add(std::to_string(v)); }
        Row& add(std::uint64_t v) { return add(std::to_string(v)); }
        Row& add(bool v) { return add(std::string(v ? "1" : "0")); }
        const std::vector<std::string>& cells() const { return cells_; }

    private:
        std::vector<std::string> cells_;
    };

    void push(const Row& row) {
        if (row.cells().size() != header_.size()) {
            std::ostringstream msg;
            msg << "csv row has " << row.cells().size() << " cells, header has " << header_.size();
            throw IoError(msg.str());
        }
        rows_.push_back(row.cells());
    }

    std::string str() const {
        std::ostringstream out;
        write_line(out, header_);
        for (const auto& r : rows_) write_line(out, r);
        return out.str();
    }

    void save(const std::filesystem::path& path) const { write_atomic(path, str()); }

private:
    static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void save_json(const std::filesystem::path& path, const Json& j) {
    write_atomic(path, j.dump(2) + "\n");
}

/// Sidecar path: out.csv -> out.json.
inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_extension(".json");
    return p;
}

// ---------------------------------------------------------------------------
// Design dump.

inline Json design_header(const Design& d) {
    return Json{{"omega", d.base().omega},
                {"lambda", d.base().lambda},
                {"alpha", d.alpha()},
                {"n", d.rows()},
                {"p", d.cols()},
                {"seed", d.seed()},
                {"kind", to_string(d.kind())}};
}

/// (i, j, X_ij) for every nonzero entry, row-major order, plus a JSON header.
inline void dump_design(const Design& d, const std::filesystem::path& csv) {
    std::ostringstream out;
    out << "i,j,x\n";
    d.for_each_one([&](Index i, Index j) { out << i << ',' << j << ",1\n"; });
    write_atomic(csv, out.str());
    save_json(sidecar_path(csv), design_header(d));
}

// ---------------------------------------------------------------------------
// Instance export / import.

constexpr const char* kInstanceSchema = "scamp-instance/1";

inline Json vector_to_json(const Vector& v) {
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const Json& j) {
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

inline Json export_qgt_instance(const Design& d, const QgtInstance& inst) {
    return Json{{"schema", kInstanceSchema},
                {"task", "qgt"},
                {"design", design_header(d)},
                {"pi", inst.pi},
                {"raw_noise_variance", inst.raw_noise_variance},
                {"sigma2", inst.sigma2},
                {"beta", vector_to_json(inst.beta)},
                {"y", vector_to_json(inst.y)},
                {"block_sums", vector_to_json(inst.block_sums)}};
}

struct ImportedQgtInstance {
    Json design;
    double pi = 0.0;
    double raw_noise_variance = 0.0;
    double sigma2 = 0.0;
    Vector beta;
    Vector y;
    Vector block_sums;
};

inline ImportedQgtInstance import_qgt_instance(const Json& j) {
    if (!j.contains("schema") || j.at("schema") != kInstanceSchema) {
        throw ConfigError(std::string("instance schema must be ") + kInstanceSchema);
    }
    if (j.value("task", "") != "qgt") throw ConfigError("instance task must be qgt");
    ImportedQgtInstance out;
    out.design = j.at("design");
    out.pi = j.at("pi").get<double>();
    out.raw_noise_variance = j.at("raw_noise_variance").get<double>();
    out.sigma2 = j.at("sigma2").get<double>();
    out.beta = vector_from_json(j.at("beta"));
    out.y = vector_from_json(j.at("y"));
    out.block_sums = vector_from_json(j.at("block_sums"));
    return out;
}

} // namespace scamp
