#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dipoletree/errors.hpp"

namespace dipoletree {

struct Observation {
    Eigen::VectorXd covariates;
    double time = 0.0;
    int status = 0;  // 1 = event observed, 0 = right-censored
};

// Per-covariate (mean, sd) captured at load time and reused at prediction time.
struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // constant columns carry sd = 1

    bool empty() const { return mean.size() == 0; }

    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const {
        if (empty()) return raw;
        return (raw - mean).cwiseQuotient(sd);
    }

    static Standardization identity(int p) {
        Standardization s;
        s.mean = Eigen::VectorXd::Zero(p);
        s.sd = Eigen::VectorXd::Ones(p);
        return s;
    }
};

struct Dataset {
    Eigen::MatrixXd x;  // n x p, standardized when loaded through load_csv
    Eigen::VectorXd time;
    std::vector<int> status;
    std::vector<std::string> covariate_names;
    Standardization standardization;

    int n() const { return static_cast<int>(x.rows()); }
    int p() const { return static_cast<int>(x.cols()); }

    Observation observation(int i) const {
        return Observation{x.row(i).transpose(), time(i), status[i]};
    }

    Dataset subset(const std::vector<int>& rows) const {
        Dataset d;
        d.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        d.time.resize(static_cast<Eigen::Index>(rows.size()));
        d.status.reserve(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            d.x.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
            d.time(static_cast<Eigen::Index>(k)) = time(rows[k]);
            d.status.push_back(status[rows[k]]);
        }
        d.covariate_names = covariate_names;
        d.standardization = standardization;
        return d;
    }
};

inline Dataset make_dataset(const std::vector<Observation>& obs) {
    if (obs.empty()) throw DataError("dataset: no observations");
    const int p = static_cast<int>(obs.front().covariates.size());
    Dataset d;
    d.x.resize(static_cast<Eigen::Index>(obs.size()), p);
    d.time.resize(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].covariates.size() != p)
            throw DataError("dataset: inconsistent covariate dimension");
        d.x.row(static_cast<Eigen::Index>(i)) = obs[i].covariates.transpose();
        d.time(static_cast<Eigen::Index>(i)) = obs[i].time;
        d.status.push_back(obs[i].status);
    }
    d.covariate_names.resize(p);
    for (int j = 0; j < p; ++j) d.covariate_names[j] = "x" + std::to_string(j + 1);
    d.standardization = Standardization::identity(p);
    return d;
}

// Standardize columns in place to mean 0, sd 1 (sample sd, n-1 denominator).
// Constant columns keep sd = 1 so they map to 0 rather than NaN.
inline void standardize_in_place(Dataset& d) {
    const int n = d.n(), p = d.p();
    Standardization s;
    s.mean.resize(p);
    s.sd.resize(p);
    for (int j = 0; j < p; ++j) {
        const double mean = d.x.col(j).mean();
        double ss = (d.x.col(j).array() - mean).square().sum();
        double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        if (!(sd > 0.0)) sd = 1.0;
        s.mean(j) = mean;
        s.sd(j) = sd;
        d.x.col(j) = (d.x.col(j).array() - mean) / sd;
    }
    d.standardization = s;
}

struct CsvSchema {
    std::string time_col = "time";
    std::string status_col = "status";
    std::vector<std::string> exclude;  // columns ignored entirely
    bool standardize = true;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        out.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_numeric(const std::string& cell, const std::string& col, std::size_t row) {
    if (cell.empty())
        throw DataError("csv: missing value in column '" + col + "' at data row " +
                        std::to_string(row));
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw DataError("csv: non-numeric cell '" + cell + "' in column '" + col +
                        "' at data row " + std::to_string(row));
    }
    if (pos != cell.size() || !std::isfinite(v))
        throw DataError("csv: non-numeric cell '" + cell + "' in column '" + col +
                        "' at data row " + std::to_string(row));
    return v;
}

}  // namespace detail

// Header row required. Columns other than time/status become covariates unless excluded.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty file '" + path + "'");
    const std::vector<std::string> header = detail::split_csv_line(line);

    int time_idx = -1, status_idx = -1;
    std::vector<int> cov_idx;
    std::vector<std::string> cov_names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        const std::string& name = header[j];
        if (name == schema.time_col) {
            time_idx = static_cast<int>(j);
        } else if (name == schema.status_col) {
            status_idx = static_cast<int>(j);
        } else if (std::find(schema.exclude.begin(), schema.exclude.end(), name) ==
                   schema.exclude.end()) {
            cov_idx.push_back(static_cast<int>(j));
            cov_names.push_back(name);
        }
    }
    if (time_idx < 0) throw DataError("csv: time column '" + schema.time_col + "' not found");
    if (status_idx < 0)
        throw DataError("csv: status column '" + schema.status_col + "' not found");
    if (cov_idx.empty()) throw DataError("csv: no covariate columns");

    std::vector<Observation> obs;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("csv: row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        Observation o;
        o.time = detail::parse_numeric(cells[time_idx], schema.time_col, row);
        if (!(o.time > 0.0))
            throw DataError("csv: non-positive time at data row " + std::to_string(row));
        const double st = detail::parse_numeric(cells[status_idx], schema.status_col, row);
        if (st != 0.0 && st != 1.0)
            throw DataError("csv: status outside {0,1} at data row " + std::to_string(row));
        o.status = static_cast<int>(st);
        o.covariates.resize(static_cast<Eigen::Index>(cov_idx.size()));
        for (std::size_t j = 0; j < cov_idx.size(); ++j)
            o.covariates(static_cast<Eigen::Index>(j)) =
                detail::parse_numeric(cells[cov_idx[j]], cov_names[j], row);
        obs.push_back(std::move(o));
    }
    if (obs.size() < 2) throw DataError("csv: need at least 2 data rows");

    Dataset d = make_dataset(obs);
    d.covariate_names = cov_names;
    if (schema.standardize) standardize_in_place(d);
    return d;
}

using IndexPair = std::pair<int, int>;  // always i < j

// A pair is right-comparable when the smaller observed time is uncensored,
// so the true ordering of the pair's survival times is known. Tied times are
// comparable when at least one of the tied observations is uncensored.
inline std::vector<IndexPair> right_comparable_pairs(const Dataset& d) {
    std::vector<IndexPair> pairs;
    const int n = d.n();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            bool comparable;
            if (d.time(i) == d.time(j)) {
                comparable = d.status[i] == 1 || d.status[j] == 1;
            } else {
                const int k = d.time(i) < d.time(j) ? i : j;
                comparable = d.status[k] == 1;
            }
            if (comparable) pairs.emplace_back(i, j);
        }
    }
    return pairs;
}

// Dipole labeling by percentile cutoffs on the pairwise time differences of
// right-comparable pairs. Pure pairs (small difference, both uncensored)
// should stay together; mixed pairs (large difference) should be split.
struct DipoleLabels {
    std::vector<IndexPair> pure;
    std::vector<IndexPair> mixed;
    double zeta1 = 0.3;
    double zeta2 = 0.6;
    std::vector<double> delta_t;  // one entry per right-comparable pair
};

inline DipoleLabels label_dipoles(const Dataset& d, double zeta1 = 0.3, double zeta2 = 0.6) {
    if (!(zeta1 > 0.0 && zeta1 < zeta2 && zeta2 < 1.0))
        throw DataError("label_dipoles: need 0 < zeta1 < zeta2 < 1");

    const std::vector<IndexPair> comparable = right_comparable_pairs(d);
    if (comparable.empty())
        throw LabelingError("label_dipoles: no right-comparable pair");
    const std::size_t ell = comparable.size();

    DipoleLabels labels;
    labels.zeta1 = zeta1;
    labels.zeta2 = zeta2;
    labels.delta_t.reserve(ell);
    for (const auto& [i, j] : comparable)
        labels.delta_t.push_back(std::abs(d.time(i) - d.time(j)));

    std::vector<double> sorted = labels.delta_t;
    std::sort(sorted.begin(), sorted.end());
    // 1-based order statistic index, clamped to [1, ell] for tiny nodes.
    const auto order_stat = [&](double zeta) {
        auto idx = static_cast<std::size_t>(std::floor(zeta * static_cast<double>(ell)));
        idx = std::clamp<std::size_t>(idx, 1, ell);
        return sorted[idx - 1];
    };
    const double thr_pure = order_stat(zeta1);
    const double thr_mixed = order_stat(zeta2);

    for (std::size_t k = 0; k < ell; ++k) {
        const auto& pr = comparable[k];
        const double dt = labels.delta_t[k];
        if (dt >= thr_mixed) {
            labels.mixed.push_back(pr);
        } else if (d.status[pr.first] == 1 && d.status[pr.second] == 1 && dt < thr_pure) {
            labels.pure.push_back(pr);
        }
    }
    return labels;
}

}  // namespace dipoletree
