#include "specsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "specsr/inference.hpp"

namespace specsr {

namespace {

double quantize_255(double v, double scale) {
    const double q = std::round(v * scale);  // std::round is half away from zero
    return std::clamp(q, 0.0, 255.0);
}

}  // namespace

void MetricSums::accumulate(const MetricSums& o) {
    sq_err += o.sq_err;
    sq_rel += o.sq_rel;
    sq_err_scaled += o.sq_err_scaled;
    sq_err_u8 += o.sq_err_u8;
    gt_sum += o.gt_sum;
    gt_sum_u8 += o.gt_sum_u8;
    count += o.count;
    count_rel += o.count_rel;
    zero_denominators += o.zero_denominators;
}

MetricSet MetricSums::finalize() const {
    MetricSet m;
    if (count == 0) return m;
    m.rmse = std::sqrt(sq_err / count);
    m.rrmse = count_rel > 0 ? std::sqrt(sq_rel / count_rel) : 0.0;
    m.rmse_g = std::sqrt(sq_err_scaled / count);
    m.rmse_g_u8 = std::sqrt(sq_err_u8 / count);
    m.excluded_zero_gt = count - count_rel;
    m.zero_denominators = zero_denominators;

    const double gt_mean = gt_sum / count;
    const double gt_mean_u8 = gt_sum_u8 / count;
    if (gt_mean > 0.0) {
        m.rrmse_g = m.rmse / gt_mean;
    } else {
        m.rrmse_g = 0.0;
        ++m.zero_denominators;
    }
    if (gt_mean_u8 > 0.0) {
        m.rrmse_g_u8 = m.rmse_g_u8 / gt_mean_u8;
    } else {
        m.rrmse_g_u8 = 0.0;
        ++m.zero_denominators;
    }
    return m;
}

MetricSums metric_sums(const HyperCube& est, const HyperCube& gt) {
    if (est.h != gt.h || est.w != gt.w || est.bands() != gt.bands())
        throw ShapeError("metrics: est " + std::to_string(est.h) + "x" + std::to_string(est.w) +
                         "x" + std::to_string(est.bands()) + " != gt " + std::to_string(gt.h) +
                         "x" + std::to_string(gt.w) + "x" + std::to_string(gt.bands()));
    MetricSums s;
    s.count = static_cast<long>(gt.data.size());

    double gt_max = 0.0;
    for (float v : gt.data) gt_max = std::max(gt_max, static_cast<double>(v));
    const double scale = gt_max > 0.0 ? 255.0 / gt_max : 0.0;
    if (gt_max <= 0.0) ++s.zero_denominators;

    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const double e = est.data[i];
        const double g = gt.data[i];
        const double d = e - g;
        s.sq_err += d * d;
        s.gt_sum += g;
        if (g != 0.0) {
            const double r = d / g;
            s.sq_rel += r * r;
            ++s.count_rel;
        }
        const double ds = (e - g) * scale;
        s.sq_err_scaled += ds * ds;
        const double du = quantize_255(e, scale) - quantize_255(g, scale);
        s.sq_err_u8 += du * du;
        s.gt_sum_u8 += quantize_255(g, scale);
    }
    return s;
}

MetricSet compute_metrics(const HyperCube& est, const HyperCube& gt, MetricMode mode) {
    const MetricSet all = metric_sums(est, gt).finalize();
    MetricSet out;
    out.excluded_zero_gt = all.excluded_zero_gt;
    out.zero_denominators = all.zero_denominators;
    if (mode == MetricMode::Float) {
        out.rmse = all.rmse;
        out.rrmse = all.rrmse;
        out.rmse_g = all.rmse_g;
        out.rrmse_g = all.rrmse_g;
    } else {
        out.rmse_g_u8 = all.rmse_g_u8;
        out.rrmse_g_u8 = all.rrmse_g_u8;
    }
    return out;
}

namespace {

std::vector<double> per_band_rmse(const HyperCube& est, const HyperCube& gt) {
    std::vector<double> out(gt.bands());
    const std::size_t plane = gt.plane_size();
    for (int b = 0; b < gt.bands(); ++b) {
        double acc = 0.0;
        const float* pe = est.plane(b);
        const float* pg = gt.plane(b);
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = static_cast<double>(pe[i]) - pg[i];
            acc += d * d;
        }
        out[b] = plane > 0 ? std::sqrt(acc / static_cast<double>(plane)) : 0.0;
    }
    return out;
}

}  // namespace

MetricReport make_report(std::vector<MetricRow> rows, std::vector<MetricSums> sums,
                         int band_count) {
    if (rows.size() != sums.size())
        throw ShapeError("make_report: " + std::to_string(rows.size()) + " rows vs " +
                         std::to_string(sums.size()) + " sum records");
    MetricReport report;
    report.rows = std::move(rows);
    report.band_count = band_count;
    report.image_count = static_cast<int>(report.rows.size());

    MetricSums pooled;
    for (const auto& s : sums) pooled.accumulate(s);
    report.pooled = pooled.finalize();

    MetricSet& m = report.mean;
    for (const auto& row : report.rows) {
        m.rmse += row.values.rmse;
        m.rrmse += row.values.rrmse;
        m.rmse_g += row.values.rmse_g;
        m.rrmse_g += row.values.rrmse_g;
        m.rmse_g_u8 += row.values.rmse_g_u8;
        m.rrmse_g_u8 += row.values.rrmse_g_u8;
        m.excluded_zero_gt += row.values.excluded_zero_gt;
        m.zero_denominators += row.values.zero_denominators;
    }
    if (!report.rows.empty()) {
        const double n = static_cast<double>(report.rows.size());
        m.rmse /= n;
        m.rrmse /= n;
        m.rmse_g /= n;
        m.rrmse_g /= n;
        m.rmse_g_u8 /= n;
        m.rrmse_g_u8 /= n;
    }
    return report;
}

MetricReport evaluate_dataset(const std::vector<ModelParams<float>>& fold_models,
                              const FoldSplit& split, const std::vector<EvalItem>& items,
                              SplitMode mode, bool enhanced, int tile) {
    std::vector<MetricRow> rows;
    std::vector<MetricSums> sums;
    int band_count = 0;
    for (const EvalItem& item : items) {
        const int fold = split.fold_of(item.name);
        int model_idx = 0;
        if (mode == SplitMode::TwoFold) {
            model_idx = 1 - fold;  // score with the model that never saw this image
        } else {
            if (fold == 0) continue;  // provided mode: training images are not scored
            model_idx = 0;
        }
        if (model_idx < 0 || model_idx >= static_cast<int>(fold_models.size()))
            throw ConfigError("evaluate_dataset: no model for fold " + std::to_string(fold) +
                              " (image '" + item.name + "', need model index " +
                              std::to_string(model_idx) + ", have " +
                              std::to_string(fold_models.size()) + ")");

        const ModelParams<float>& model = fold_models[model_idx];
        HyperCube est = enhanced
                            ? enhanced_predict(model, item.rgb, item.gt.wavelengths, tile)
                            : predict_image(model, item.rgb, item.gt.wavelengths, tile);

        MetricSums s = metric_sums(est, item.gt);
        MetricRow row;
        row.image = item.name;
        row.values = s.finalize();
        row.per_band_rmse = per_band_rmse(est, item.gt);
        band_count = item.gt.bands();
        rows.push_back(std::move(row));
        sums.push_back(s);
    }
    return make_report(std::move(rows), std::move(sums), band_count);
}

namespace {

constexpr const char* kMetricNames[6] = {"rmse",       "rrmse",      "rmse_g",
                                         "rrmse_g",    "rmse_g_u8",  "rrmse_g_u8"};

double metric_by_index(const MetricSet& m, int i) {
    switch (i) {
        case 0: return m.rmse;
        case 1: return m.rrmse;
        case 2: return m.rmse_g;
        case 3: return m.rrmse_g;
        case 4: return m.rmse_g_u8;
        default: return m.rrmse_g_u8;
    }
}

const char* kReportHeader =
    "# Per image, over all pixels and bands:\n"
    "#   rmse       = sqrt(mean (est-gt)^2), native scale\n"
    "#   rrmse      = sqrt(mean ((est-gt)/gt)^2), gt==0 samples excluded (counted below)\n"
    "#   rmse_g     = rmse of both cubes rescaled by 255/max(gt), unquantized\n"
    "#   rrmse_g    = rmse / mean(gt)\n"
    "#   rmse_g_u8  = rmse_g after rounding the rescaled cubes to 0..255\n"
    "#   rrmse_g_u8 = quantized rmse / mean of quantized gt\n"
    "# __mean__ rows average per-image values (primary aggregation);\n"
    "# __pooled__ rows apply the formulas to all pixels of all images at once.\n";

}  // namespace

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open report for writing: " + path);
    f << kReportHeader;
    f << "image,metric,value\n";
    char buf[160];
    auto emit = [&](const std::string& image, const MetricSet& m) {
        for (int i = 0; i < 6; ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.8g\n", image.c_str(), kMetricNames[i],
                          metric_by_index(m, i));
            f << buf;
        }
        std::snprintf(buf, sizeof(buf), "%s,excluded_zero_gt,%ld\n", image.c_str(),
                      m.excluded_zero_gt);
        f << buf;
    };
    for (const auto& row : report.rows) emit(row.image, row.values);
    emit("__mean__", report.mean);
    emit("__pooled__", report.pooled);
    if (!f) throw IoError("short write to report: " + path);
}

void write_per_band_csv(const MetricReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open per-band report for writing: " + path);
    f << "image,band,rmse\n";
    char buf[128];
    for (const auto& row : report.rows)
        for (std::size_t b = 0; b < row.per_band_rmse.size(); ++b) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%.8g\n", row.image.c_str(), b,
                          row.per_band_rmse[b]);
            f << buf;
        }
    if (!f) throw IoError("short write to per-band report: " + path);
}

void print_report(const MetricReport& report, std::ostream& os) {
    os << kReportHeader;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-24s %10s %10s %10s %10s %10s %10s\n", "image", "rmse",
                  "rrmse", "rmse_g", "rrmse_g", "rmse_g_u8", "rrmse_g_u8");
    os << buf;
    auto line = [&](const std::string& name, const MetricSet& m) {
        std::snprintf(buf, sizeof(buf), "%-24s %10.5g %10.5g %10.5g %10.5g %10.5g %10.5g\n",
                      name.c_str(), m.rmse, m.rrmse, m.rmse_g, m.rrmse_g, m.rmse_g_u8,
                      m.rrmse_g_u8);
        os << buf;
    };
    for (const auto& row : report.rows) line(row.image, row.values);
    line("__mean__", report.mean);
    line("__pooled__", report.pooled);
    if (report.mean.excluded_zero_gt > 0)
        os << "note: " << report.mean.excluded_zero_gt
           << " zero-gt samples excluded from rrmse\n";
}

}  // namespace specsr
