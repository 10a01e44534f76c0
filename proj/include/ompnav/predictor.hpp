#pragma once
// Map prediction: a 120 x 120 robot-centered observed submap in, a co-centered
// 150 x 150 expanded map out. Class order everywhere is Free < Occupied <
// Unknown, matching the cell encoding.

#include "ompnav/gridmap.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <memory>
#include <vector>

namespace ompnav {

inline constexpr int kPredictorInputSize = 120;   // 6 m at 0.05 m/cell
inline constexpr int kPredictorOutputSize = 150;  // 7.5 m at 0.05 m/cell
inline constexpr int kPredictorBorder = (kPredictorOutputSize - kPredictorInputSize) / 2;
inline constexpr int kClassCount = 3;

struct PredictorOutput {
    /// Per-class scores, [class][row][col], row-major, 150 x 150 per class.
    std::vector<float> scores;
    OccupancyGrid grid;

    float score(int cls, int col, int row) const {
        return scores[(static_cast<std::size_t>(cls) * kPredictorOutputSize + row) * kPredictorOutputSize + col];
    }
};

/// Output geometry for an input grid: same resolution, 15-cell border.
inline OccupancyGrid output_frame(const OccupancyGrid& input, Cell fill = Cell::Unknown) {
    return OccupancyGrid(kPredictorOutputSize, kPredictorOutputSize, input.resolution(),
                         input.origin() - Vec2::Constant(kPredictorBorder * input.resolution()), fill);
}

inline void check_predictor_input(const OccupancyGrid& m) {
    if (m.width() != kPredictorInputSize || m.height() != kPredictorInputSize)
        throw Error(ErrorCode::DimensionMismatch, "predictor input must be 120x120");
}

/// First-index argmax over the class axis.
inline OccupancyGrid argmax_grid(const std::vector<float>& scores, const OccupancyGrid& frame) {
    OccupancyGrid g = frame;
    const std::size_t plane = static_cast<std::size_t>(g.width()) * g.height();
    for (std::size_t i = 0; i < plane; ++i) {
        int best = 0;
        for (int c = 1; c < kClassCount; ++c)
            if (scores[c * plane + i] > scores[best * plane + i]) best = c;
        g.cells()[i] = static_cast<Cell>(best);
    }
    return g;
}

/// One-hot scores of a grid (what non-learned predictors report).
inline std::vector<float> one_hot_scores(const OccupancyGrid& g) {
    const std::size_t plane = g.size();
    std::vector<float> s(plane * kClassCount, 0.0f);
    for (std::size_t i = 0; i < plane; ++i) s[static_cast<std::size_t>(g.cells()[i]) * plane + i] = 1.0f;
    return s;
}

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual PredictorOutput predict(const OccupancyGrid& input) const = 0;
};

/// Closing of the argmax grid to remove isolated mispredictions.
inline OccupancyGrid postprocess(const PredictorOutput& out) { return morphological_close(out.grid, 5); }

struct BaselineConfig {
    int window = 7;            // PCA neighbourhood edge, cells
    double free_band = 0.4;    // m, on the known-free side of an extension
    double min_anisotropy = 4.0;  // lambda1 / lambda2 needed to call cells a line
    int min_cells = 3;
};

/// Straight-wall extrapolation. Occupied cells touching Unknown get a local
/// direction from PCA over the Occupied cells in their window; from each such
/// cell the wall is extended both ways through Unknown cells up to the border,
/// stopping at the first cell that is not Unknown. A band next to every
/// extension, on the side where the window saw more Free cells, becomes Free
/// where still Unknown.
inline OccupancyGrid baseline_extrapolate_grid(const OccupancyGrid& input, const BaselineConfig& cfg = {}) {
    check_predictor_input(input);
    OccupancyGrid out = output_frame(input);
    const int b = kPredictorBorder;
    for (int r = 0; r < input.height(); ++r)
        for (int c = 0; c < input.width(); ++c) out.set(c + b, r + b, input.at(c, r));

    const int half = cfg.window / 2;
    auto touches_unknown = [&](int c, int r) {
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (!dr && !dc) continue;
                const int cc = c + dc, rr = r + dr;
                if (out.in_bounds(cc, rr) && out.at(cc, rr) == Cell::Unknown) return true;
            }
        return false;
    };

    struct Extension {
        std::vector<CellIndex> cells;
        Vec2 normal;  // unit, towards the free side
    };
    std::vector<Extension> extensions;
    const OccupancyGrid copy = out;  // frontier analysis uses the unextended map
    for (int r = b; r < b + input.height(); ++r)
        for (int c = b; c < b + input.width(); ++c) {
            if (copy.at(c, r) != Cell::Occupied || !touches_unknown(c, r)) continue;
            Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
            Vec2 mean = Vec2::Zero();
            int n = 0, free_pos = 0, free_neg = 0;
            std::vector<Vec2> pts;
            for (int dr = -half; dr <= half; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    if (!copy.in_bounds(c + dc, r + dr)) continue;
                    if (copy.at(c + dc, r + dr) == Cell::Occupied) pts.emplace_back(dc, dr);
                }
            n = static_cast<int>(pts.size());
            if (n < cfg.min_cells) continue;
            for (const Vec2& p : pts) mean += p;
            mean /= n;
            for (const Vec2& p : pts) cov += (p - mean) * (p - mean).transpose();
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
            const double l1 = es.eigenvalues()[1], l2 = es.eigenvalues()[0];
            if (!(l1 > 0.0) || l1 < cfg.min_anisotropy * std::max(l2, 1e-12)) continue;
            const Vec2 e1 = es.eigenvectors().col(1);
            const Vec2 e2(-e1.y(), e1.x());
            for (int dr = -half; dr <= half; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    if (!copy.in_bounds(c + dc, r + dr) || copy.at(c + dc, r + dr) != Cell::Free) continue;
                    const double side = e2.dot(Vec2(dc, dr) - mean);
                    if (side > 0.5) ++free_pos;
                    else if (side < -0.5) ++free_neg;
                }
            const Vec2 normal = free_pos >= free_neg ? e2 : Vec2(-e2);
            for (const Vec2& dir : {e1, Vec2(-e1)}) {
                Extension ext;
                ext.normal = normal;
                CellIndex prev{c, r};
                for (int k = 1;; ++k) {
                    const Vec2 q = Vec2(c + 0.5, r + 0.5) + dir * (0.5 * k);
                    const CellIndex ci{static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
                    if (ci == prev) continue;
                    if (!out.in_bounds(ci) || out.at(ci) != Cell::Unknown) break;
                    // Diagonal steps must not slip between two known cells.
                    if (ci.col != prev.col && ci.row != prev.row && out.at(prev.col, ci.row) != Cell::Unknown &&
                        out.at(ci.col, prev.row) != Cell::Unknown)
                        break;
                    out.set(ci, Cell::Occupied);
                    ext.cells.push_back(ci);
                    prev = ci;
                }
                if (!ext.cells.empty()) extensions.push_back(std::move(ext));
            }
        }

    const double band = cfg.free_band / out.resolution();
    for (const Extension& ext : extensions)
        for (const CellIndex& ci : ext.cells) {
            const Vec2 base(ci.col + 0.5, ci.row + 0.5);
            for (int k = 1; 0.5 * k <= band; ++k) {
                const Vec2 q = base + ext.normal * (0.5 * k);
                const CellIndex cj{static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
                if (cj == ci) continue;
                if (!out.in_bounds(cj)) break;
                const Cell v = out.at(cj);
                if (v == Cell::Occupied) break;
                if (v == Cell::Unknown) out.set(cj, Cell::Free);
            }
        }
    return out;
}

class BaselinePredictor final : public Predictor {
public:
    explicit BaselinePredictor(BaselineConfig cfg = {}) : cfg_(cfg) {}
    PredictorOutput predict(const OccupancyGrid& input) const override {
        PredictorOutput out;
        out.grid = baseline_extrapolate_grid(input, cfg_);
        out.scores = one_hot_scores(out.grid);
        return out;
    }

private:
    BaselineConfig cfg_;
};

inline PredictorOutput baseline_extrapolate(const OccupancyGrid& input) { return BaselinePredictor().predict(input); }

inline PredictorOutput predict(const OccupancyGrid& input, const Predictor& impl) { return impl.predict(input); }

}  // namespace ompnav
