#include "edgecast/qoc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace edgecast::qoc {

DetectionTable DetectionTable::builtin() {
    return DetectionTable{{
        {0.5, 0.95, 0.99},
        {1.0, 0.84, 0.96},
        {2.0, 0.46, 0.74},
        {5.0, 0.10, 0.40},
    }};
}

DetectionTable DetectionTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open detection table: " + path);
    DetectionTable table;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ss(line);
        Row row{};
        if (ss >> row.loss_percent >> row.uniform >> row.differential)
            table.rows.push_back(row);
    }
    table.validate();
    return table;
}

void DetectionTable::validate() const {
    if (rows.empty())
        throw std::runtime_error("detection table is empty");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        if (r.uniform < 0 || r.uniform > 1 || r.differential < 0 || r.differential > 1)
            throw std::runtime_error("detection rate outside [0,1]");
        if (r.differential < r.uniform)
            throw std::runtime_error("differential detection below uniform");
        if (i > 0) {
            if (rows[i - 1].loss_percent >= r.loss_percent)
                throw std::runtime_error("loss column not strictly increasing");
            if (rows[i - 1].uniform < r.uniform || rows[i - 1].differential < r.differential)
                throw std::runtime_error("detection column not nonincreasing");
        }
    }
}

double bandwidth_full(std::span<const RateModel> rates, std::size_t num_processes) {
    double sum = 0;
    for (const RateModel& r : rates)
        sum += r.bitrate(StreamQuality::full());
    return static_cast<double>(num_processes) * sum;
}

StreamQuality effective_quality(std::span<const StreamQuality> omega_row) {
    if (omega_row.empty())
        throw EmptyRequirement("no process uses this stream");
    StreamQuality q{0.0};
    for (StreamQuality w : omega_row)
        q.differential_keep = std::max(q.differential_keep, w.differential_keep);
    return q;
}

double bandwidth_saved(std::span<const RateModel> rates,
                       std::span<const StreamQuality> q_eff) {
    double saved = 0;
    for (std::size_t i = 0; i < rates.size(); ++i)
        saved += rates[i].bitrate(StreamQuality::full()) - rates[i].bitrate(q_eff[i]);
    return saved;
}

namespace {

double column(const DetectionTable::Row& r, DropStrategy s) {
    return s == DropStrategy::Uniform ? r.uniform : r.differential;
}

} // namespace

double detection_lookup(double loss_percent, DropStrategy strategy,
                        const DetectionTable& table) {
    const auto& rows = table.rows;
    if (loss_percent <= rows.front().loss_percent)
        return column(rows.front(), strategy);
    if (loss_percent >= rows.back().loss_percent)
        return column(rows.back(), strategy);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (loss_percent <= rows[i].loss_percent) {
            double x0 = rows[i - 1].loss_percent, x1 = rows[i].loss_percent;
            double y0 = column(rows[i - 1], strategy), y1 = column(rows[i], strategy);
            return y0 + (y1 - y0) * (loss_percent - x0) / (x1 - x0);
        }
    }
    return column(rows.back(), strategy);
}

double max_tolerable_loss(double threshold, DropStrategy strategy,
                          const DetectionTable& table) {
    const auto& rows = table.rows;
    if (threshold > column(rows.front(), strategy))
        throw Infeasible("detection threshold exceeds zero-loss detection rate");
    // Detection is nonincreasing in loss; scan segments from the high-loss
    // end so flat segments resolve to their largest loss.
    if (threshold <= column(rows.back(), strategy))
        return rows.back().loss_percent;
    for (std::size_t i = rows.size() - 1; i > 0; --i) {
        double y0 = column(rows[i - 1], strategy), y1 = column(rows[i], strategy);
        if (threshold <= y0) {
            if (y0 == y1)
                return rows[i].loss_percent;
            double x0 = rows[i - 1].loss_percent, x1 = rows[i].loss_percent;
            return x0 + (y0 - threshold) * (x1 - x0) / (y0 - y1);
        }
    }
    return rows.front().loss_percent;
}

Solution solve_min_bandwidth(
    const std::map<std::pair<std::size_t, std::size_t>, QocRequirement>& thresholds,
    const DetectionTable& table, std::size_t num_streams, std::size_t num_processes) {
    Solution sol;
    sol.omega.num_streams = num_streams;
    sol.omega.num_processes = num_processes;
    sol.q_eff.assign(num_streams, StreamQuality{0.0});

    std::vector<bool> used(num_streams, false);
    for (const auto& [key, req] : thresholds) {
        auto [stream, process] = key;
        double loss = max_tolerable_loss(req.threshold, req.strategy, table);
        StreamQuality q{std::clamp(1.0 - loss / 100.0, 0.0, 1.0)};
        sol.omega.omega[key] = q;
        used[stream] = true;
        sol.q_eff[stream].differential_keep =
            std::max(sol.q_eff[stream].differential_keep, q.differential_keep);
    }
    // Unused streams keep no meaningful Q_eff; callers exclude them.
    for (std::size_t i = 0; i < num_streams; ++i)
        if (!used[i])
            sol.q_eff[i] = StreamQuality::full();

    for (const auto& [key, q] : sol.omega.omega) {
        auto [stream, process] = key;
        double eff = sol.q_eff[stream].differential_keep;
        double d = eff > 0 ? 1.0 - q.differential_keep / eff : 0.0;
        sol.delta.delta[key] = std::clamp(d, 0.0, 1.0);
    }
    return sol;
}

} // namespace edgecast::qoc
