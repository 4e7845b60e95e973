#pragma once

// Running Birkhoff sums over time-one steps of a suspension orbit.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace seclab {

/// Piecewise delta-truncated distance, saturating at 1 beyond 2 delta.
inline double truncated_distance(double d, double delta)
{
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("truncated_distance: delta must lie in (0, 1/2)");
    if (!(d > 0.0)) throw std::domain_error("truncated_distance: point lies on the singular set");
    if (d <= delta) return d;
    if (d < 2.0 * delta) return (1.0 - delta) / delta * d + 2.0 * delta - 1.0;
    return 1.0;
}

inline std::vector<double> default_scale_grid() { return {1e-2, 1e-3, 1e-4}; }

struct WindowSnapshot {
    long n = 0;
    double psi_cu = 0.0;
    double psi3 = 0.0;
    double log_jcu = 0.0;
};

class BirkhoffAccumulator {
public:
    static constexpr long kSnapshotEvery = 1024;

    BirkhoffAccumulator(std::vector<double> deltas = default_scale_grid(),
                        std::vector<double> radii = default_scale_grid())
        : deltas(std::move(deltas)), radii(std::move(radii))
    {
        sum_trunc.assign(this->deltas.size(), 0.0);
        int_trunc.assign(this->deltas.size(), 0.0);
        visits.assign(this->radii.size(), 0);
        ball_time.assign(this->radii.size(), 0.0);
        ball_integral.assign(this->radii.size(), 0.0);
    }

    std::vector<double> deltas, radii;

    long n = 0;          ///< time-one steps
    long returns = 0;    ///< Poincare returns (laps)
    long crossings = 0;  ///< laps through the cylinder
    double total_time = 0.0;
    double sum_psi_cu = 0.0;
    double sum_psi3 = 0.0;
    double sum_log_jcu = 0.0;
    /// Per-lap sums with the crossing part replaced by its rate integral.
    double sum_rate_accounting = 0.0;
    double sum_tau_crossing = 0.0;
    double sum_rate_crossing = 0.0;

    std::vector<double> sum_trunc;   ///< per delta, at integer times
    std::vector<long> visits;        ///< per radius, at integer times
    std::vector<double> int_trunc;   ///< per delta, time integral
    std::vector<double> ball_time;   ///< per radius, time spent in the balls
    std::vector<double> ball_integral; ///< per radius, time integral of -log d inside the balls

    std::vector<WindowSnapshot> snapshots;
    bool snapshots_valid = true;

    /// Records one time-one step; dist is the chart distance to the singular set
    /// at the step end (infinity outside the cylinder).
    void add_step(double psi, double psi3, double log_j, double dist)
    {
        ++n;
        sum_psi_cu += psi;
        sum_psi3 += psi3;
        sum_log_jcu += log_j;
        for (size_t i = 0; i < deltas.size(); ++i)
            if (dist < 2.0 * deltas[i]) sum_trunc[i] -= std::log(truncated_distance(dist, deltas[i]));
        for (size_t i = 0; i < radii.size(); ++i)
            if (dist < radii[i]) ++visits[i];
        if (n % kSnapshotEvery == 0) snapshots.push_back({n, sum_psi_cu, sum_psi3, sum_log_jcu});
    }

    void merge(const BirkhoffAccumulator& o)
    {
        if (o.deltas != deltas || o.radii != radii)
            throw std::invalid_argument("BirkhoffAccumulator::merge: grids differ");
        n += o.n;
        returns += o.returns;
        crossings += o.crossings;
        total_time += o.total_time;
        sum_psi_cu += o.sum_psi_cu;
        sum_psi3 += o.sum_psi3;
        sum_log_jcu += o.sum_log_jcu;
        sum_rate_accounting += o.sum_rate_accounting;
        sum_tau_crossing += o.sum_tau_crossing;
        sum_rate_crossing += o.sum_rate_crossing;
        for (size_t i = 0; i < deltas.size(); ++i) {
            sum_trunc[i] += o.sum_trunc[i];
            int_trunc[i] += o.int_trunc[i];
        }
        for (size_t i = 0; i < radii.size(); ++i) {
            visits[i] += o.visits[i];
            ball_time[i] += o.ball_time[i];
            ball_integral[i] += o.ball_integral[i];
        }
        // Window snapshots only combine for orbits of equal length.
        if (snapshots_valid && o.snapshots_valid && snapshots.size() == o.snapshots.size()) {
            for (size_t i = 0; i < snapshots.size(); ++i) {
                if (snapshots[i].n != o.snapshots[i].n) {
                    snapshots_valid = false;
                    break;
                }
                snapshots[i].psi_cu += o.snapshots[i].psi_cu;
                snapshots[i].psi3 += o.snapshots[i].psi3;
                snapshots[i].log_jcu += o.snapshots[i].log_jcu;
            }
        } else {
            snapshots_valid = false;
        }
    }

    double psi_cu_avg() const { return n ? sum_psi_cu / n : std::numeric_limits<double>::quiet_NaN(); }
    double psi3_avg() const { return n ? sum_psi3 / n : std::numeric_limits<double>::quiet_NaN(); }
    double log_jcu_avg() const { return n ? sum_log_jcu / n : std::numeric_limits<double>::quiet_NaN(); }
    double rate_accounting_avg() const
    {
        return total_time > 0.0 ? sum_rate_accounting / total_time : std::numeric_limits<double>::quiet_NaN();
    }
};

} // namespace seclab
