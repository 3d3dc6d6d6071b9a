#pragma once

#include <moac/errors.hpp>
#include <moac/moac.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace moac {

/// 17 significant digits, so every double round-trips.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> metrics_columns(int n_objectives, bool with_oracle) {
    std::vector<std::string> cols{"t"};
    auto indexed = [&](const std::string& stem) {
        for (int i = 1; i <= n_objectives; ++i) cols.push_back(stem + "_" + std::to_string(i));
    };
    indexed("reward_mean");
    cols.push_back("grad_norm_sq");
    indexed("lambda");
    cols.push_back("eta_t");
    if (with_oracle) {
        indexed("critic_err");
        indexed("J_exact");
        cols.push_back("pareto_gap");
    }
    return cols;
}

/// Writes the header once, then one row per record. Oracle cells are empty on rows without diagnostics.
class CsvMetricsWriter {
public:
    CsvMetricsWriter(std::ostream& out, int n_objectives, bool with_oracle)
        : out_(&out), n_obj_(n_objectives), with_oracle_(with_oracle) {
        const auto cols = metrics_columns(n_objectives, with_oracle);
        for (std::size_t k = 0; k < cols.size(); ++k) *out_ << (k ? "," : "") << cols[k];
        *out_ << '\n';
    }

    void write(const MetricsRecord& rec) {
        std::string line = std::to_string(rec.t);
        auto cell = [&](double v) { line += ',' + format_double(v); };
        auto cells = [&](const std::optional<Eigen::VectorXd>& v) {
            for (int i = 0; i < n_obj_; ++i) {
                line += ',';
                if (v) line += format_double((*v)[i]);
            }
        };
        for (int i = 0; i < n_obj_; ++i) cell(rec.reward_mean[i]);
        cell(rec.grad_norm_sq);
        for (int i = 0; i < n_obj_; ++i) cell(rec.lambda[i]);
        cell(rec.eta);
        if (with_oracle_) {
            cells(rec.critic_err);
            cells(rec.J_exact);
            line += ',';
            if (rec.pareto_gap) line += format_double(*rec.pareto_gap);
        }
        *out_ << line << '\n';
    }

private:
    std::ostream* out_;
    int n_obj_;
    bool with_oracle_;
};

inline nlohmann::json to_json(const MetricsRecord& rec) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json doc{{"t", rec.t},
                       {"reward_mean", vec(rec.reward_mean)},
                       {"grad_norm_sq", rec.grad_norm_sq},
                       {"lambda", vec(rec.lambda)},
                       {"eta_t", rec.eta}};
    if (rec.critic_err) doc["critic_err"] = vec(*rec.critic_err);
    if (rec.J_exact) doc["J_exact"] = vec(*rec.J_exact);
    if (rec.pareto_gap) doc["pareto_gap"] = *rec.pareto_gap;
    return doc;
}

inline void write_metrics_jsonl(std::ostream& out, const MetricsRecord& rec) { out << to_json(rec).dump() << '\n'; }

/// A parsed metrics CSV: header plus rows of optional cells.
struct MetricsTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::optional<double>>> rows;

    int column(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return int(k);
        return -1;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline MetricsTable read_metrics_csv(std::istream& in) {
    MetricsTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("metrics CSV is empty");
    table.header = split_csv_line(line);
    if (table.header.empty() || table.header.front() != "t") throw DataError("metrics CSV header must start with t");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != table.header.size())
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        std::vector<std::optional<double>> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            if (f.empty()) {
                row.emplace_back();
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (end != f.c_str() + f.size()) throw DataError("line " + std::to_string(line_no) + ": bad number '" + f + "'");
            row.emplace_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace moac
