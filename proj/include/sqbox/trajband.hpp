#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sqbox/conformal.hpp"
#include "sqbox/matrix.hpp"
#include "sqbox/qrf.hpp"

namespace sqbox {

// Trajectories as rows: start-state features (n x d) and the behavior values
// (n x H), behavior_t being the cumulative reward through timestep t.
struct TrajectoryDataset {
    Matrix features;
    Matrix behavior;

    std::size_t size() const { return features.rows(); }
    std::size_t horizon() const { return behavior.cols(); }
};

struct SplitConfig {
    long l = 0;              // training rows (quantile regression)
    long m = 0;              // scale rows (sigma estimation), SQBox family
    double delta = 0.1;      // target trajectory miscoverage
    double delta_prime = 0.2;  // inner quantile-regression miscoverage
    QuantileStrategy strategy = QuantileStrategy::strict();
};

struct Band {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t horizon() const { return lo.size(); }
};

// Per-timestep exceedance max{0, q_lo - b, b - q_hi}.
std::vector<double> exceedance(const std::vector<double>& behavior,
                               const std::vector<double>& q_lo,
                               const std::vector<double>& q_hi);

using ForestPtr = std::shared_ptr<const Forest>;

// One forest per timestep fitted on the first l rows; shared by every method
// that needs quantile predictions at any level.
std::vector<ForestPtr> fit_timestep_forests(const TrajectoryDataset& data,
                                            long l,
                                            const ForestParams& params);

// Raw quantile-regression band at the given levels (lower/upper swapped if
// they cross).
Band predict_qr_band(const std::vector<ForestPtr>& forests,
                     const std::vector<double>& x, double alpha_lo,
                     double alpha_hi);

// Bands for every row of `features`, one batched prediction per distinct
// feature vector (start states repeat heavily in MDP test sets).
std::vector<Band> predict_qr_bands(const std::vector<ForestPtr>& forests,
                                   const Matrix& features, double alpha_lo,
                                   double alpha_hi);

struct SqboxModel {
    std::vector<ForestPtr> forests;  // one per timestep
    double alpha_lo = 0.0;           // delta_prime / 2
    double alpha_hi = 0.0;           // 1 - delta_prime / 2
    std::vector<double> sigma;       // per-timestep scale
    double beta = 0.0;
    bool guaranteed = true;
    SplitConfig config;

    std::size_t horizon() const { return forests.size(); }
};

struct CteModel {
    std::vector<ForestPtr> forests;
    double alpha_lo = 0.0;  // delta / 2
    double alpha_hi = 0.0;  // 1 - delta / 2
    double c_hat = 0.0;
    bool guaranteed = true;
    SplitConfig config;

    std::size_t horizon() const { return forests.size(); }
};

SqboxModel fit_sqbox(const TrajectoryDataset& data, const SplitConfig& config,
                     const ForestParams& forest_params);
// Same, but reusing already-fitted per-timestep forests (they only depend on
// the first l rows and the forest params, not on delta or the strategy).
SqboxModel fit_sqbox_prefit(std::vector<ForestPtr> forests,
                            const TrajectoryDataset& data,
                            const SplitConfig& config);

// Exceedance-derived calibration pieces. They depend on l, m and delta_prime
// but not on delta or the strategy, so several (delta, strategy) settings
// can share one computation.
struct SqboxCalibration {
    std::vector<double> sigma;   // per-timestep scale from rows l+1..l+m
    std::vector<double> scores;  // standardized max exceedance, rows l+m+1..n
};
SqboxCalibration sqbox_calibration(const std::vector<ForestPtr>& forests,
                                   const TrajectoryDataset& data,
                                   const SplitConfig& config);
SqboxModel assemble_sqbox(std::vector<ForestPtr> forests,
                          const SqboxCalibration& calibration,
                          const SplitConfig& config);

Band predict_band(const SqboxModel& model, const std::vector<double>& x);

CteModel fit_cte(const TrajectoryDataset& data, const SplitConfig& config,
                 const ForestParams& forest_params);
CteModel fit_cte_prefit(std::vector<ForestPtr> forests,
                        const TrajectoryDataset& data,
                        const SplitConfig& config);

// Total exceedances of rows l+1..n at the band levels (delta/2, 1-delta/2);
// reusable across strategies at a fixed delta.
std::vector<double> cte_calibration(const std::vector<ForestPtr>& forests,
                                    const TrajectoryDataset& data,
                                    const SplitConfig& config);
CteModel assemble_cte(std::vector<ForestPtr> forests,
                      const std::vector<double>& totals,
                      const SplitConfig& config);

// The CTE band is the raw quantile-regression band; the certificate is the
// (band, c_hat) pair.
Band predict_band(const CteModel& model, const std::vector<double>& x);

bool band_covers(const Band& band, const std::vector<double>& behavior);

// Joint band over several behavior variables observed on the same
// trajectories: scores take the max standardized exceedance across all
// variables, so one shared beta certifies all bands simultaneously.
std::vector<SqboxModel> fit_sqbox_multi(
    const Matrix& features, const std::vector<Matrix>& behaviors,
    const SplitConfig& config, const ForestParams& forest_params);

// Scalar conformalized quantile regression used as the H=1 oracle. Fits
// quantile regressions at delta/2 and 1-delta/2 on the first l rows and
// shifts them by the conformal quantile of the (unclamped by default)
// calibration scores.
struct ScalarCqr {
    ForestPtr forest;
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    double c_hat = 0.0;
    bool guaranteed = true;

    std::pair<double, double> predict(const std::vector<double>& x) const;
};

ScalarCqr cqr_scalar(const Matrix& features,
                     const std::vector<double>& responses, long l,
                     double delta,
                     const ForestParams& forest_params = ForestParams{},
                     bool clamp_at_zero = false,
                     const QuantileStrategy& strategy =
                         QuantileStrategy::strict());

// Lower-level variant with injected quantile functions, used for oracle
// tests: returns the conformal correction c_hat.
ConformalQuantile cqr_correction(
    const std::function<double(const std::vector<double>&)>& q_lo,
    const std::function<double(const std::vector<double>&)>& q_hi,
    const Matrix& calib_features, const std::vector<double>& calib_responses,
    double delta, bool clamp_at_zero,
    const QuantileStrategy& strategy = QuantileStrategy::strict());

// Model bundle serialization (single self-describing JSON file).
void save_model(const SqboxModel& model, const std::string& path);
void save_model(const CteModel& model, const std::string& path);
std::string model_kind_in_file(const std::string& path);
SqboxModel load_sqbox_model(const std::string& path);
CteModel load_cte_model(const std::string& path);

}  // namespace sqbox
