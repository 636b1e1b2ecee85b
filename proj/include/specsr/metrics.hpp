#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "specsr/data_pipeline.hpp"
#include "specsr/hypercube.hpp"
#include "specsr/model.hpp"

namespace specsr {

// Metric definitions, pinned here and echoed in every report header.
// Per image, over all pixels and bands (P samples):
//   rmse        = sqrt(mean (est - gt)^2), native scale
//   rrmse       = sqrt(mean ((est - gt) / gt)^2), gt == 0 samples excluded
//                 and counted
//   rmse_g      = rmse of both cubes rescaled by 255 / max(gt) (float)
//   rrmse_g     = rmse / mean(gt)
//   rmse_g_u8   = rmse_g after rounding the rescaled cubes to 0..255
//                 (half away from zero, clamped)
//   rrmse_g_u8  = quantized rmse / mean of the quantized gt
// Dataset aggregation: the arithmetic mean of per-image values (primary)
// and the same formulas pooled over all pixels of all images (secondary).

enum class MetricMode { Float, Uint8 };

struct MetricSet {
    double rmse = 0.0;
    double rrmse = 0.0;
    double rmse_g = 0.0;
    double rrmse_g = 0.0;
    double rmse_g_u8 = 0.0;
    double rrmse_g_u8 = 0.0;
    long excluded_zero_gt = 0;  // samples skipped by the rrmse division guard
    long zero_denominators = 0; // degenerate G denominators encountered
};

/// Raw sums, kept so per-image rows can be pooled into dataset totals.
struct MetricSums {
    double sq_err = 0.0;        // sum (est - gt)^2
    double sq_rel = 0.0;        // sum ((est - gt) / gt)^2 over gt != 0
    double sq_err_scaled = 0.0; // sum of squared error after 255/max(gt) scaling
    double sq_err_u8 = 0.0;     // sum of squared error after quantization
    double gt_sum = 0.0;
    double gt_sum_u8 = 0.0;
    long count = 0;
    long count_rel = 0;
    long zero_denominators = 0;

    void accumulate(const MetricSums& o);
    MetricSet finalize() const;
};

MetricSums metric_sums(const HyperCube& est, const HyperCube& gt);

/// The six-variant row for one image. `mode` selects which variants are
/// populated: Float fills rmse/rrmse/rmse_g/rrmse_g, Uint8 fills the
/// quantized pair. Use metric_sums(...).finalize() for all six at once.
MetricSet compute_metrics(const HyperCube& est, const HyperCube& gt, MetricMode mode);

struct MetricRow {
    std::string image;
    MetricSet values;
    std::vector<double> per_band_rmse;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    MetricSet mean;    // arithmetic mean of per-image values (primary)
    MetricSet pooled;  // all pixels of all images pooled (secondary)
    int band_count = 0;
    int image_count = 0;
};

/// Builds the report from per-image rows; recomputes mean and pooled.
MetricReport make_report(std::vector<MetricRow> rows, std::vector<MetricSums> sums,
                         int band_count);

struct EvalItem {
    std::string name;
    HyperCube gt;
    Tensor4<float> rgb;
};

/// Scores every item with the model that did not train on it: in two-fold
/// mode the opposite fold's model, in provided mode fold-1 (test) images
/// with the single fold-0 model. `enhanced` switches to the 8-transform
/// averaged prediction.
MetricReport evaluate_dataset(const std::vector<ModelParams<float>>& fold_models,
                              const FoldSplit& split, const std::vector<EvalItem>& items,
                              SplitMode mode, bool enhanced, int tile = 0);

/// CSV rows `image,metric,value` under a header documenting the formulas;
/// aggregate rows use the reserved image names `__mean__` and `__pooled__`.
void write_report_csv(const MetricReport& report, const std::string& path);

/// Optional long-form CSV `image,band,rmse` for plotting.
void write_per_band_csv(const MetricReport& report, const std::string& path);

void print_report(const MetricReport& report, std::ostream& os);

}  // namespace specsr
