#include "polarseg/metrics.hpp"

#include <stdexcept>

namespace polarseg {

void ConfusionMatrix::accumulate(const Tensor& predicted, const Tensor& actual) {
    check_same_shape(predicted.shape, actual.shape, "ConfusionMatrix::accumulate");
    for (std::size_t i = 0; i < predicted.data.size(); ++i) {
        const int p = predicted.data[i] >= 0.5f ? 1 : 0;
        const int a = actual.data[i] >= 0.5f ? 1 : 0;
        ++counts[p][a];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    for (int p = 0; p < 2; ++p)
        for (int a = 0; a < 2; ++a) counts[p][a] += other.counts[p][a];
}

std::int64_t ConfusionMatrix::total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

IouReport mean_iou(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("mean_iou: empty confusion matrix");
    IouReport rep;
    double sum = 0.0;
    int n = 0;
    for (int c = 0; c < 2; ++c) {
        const std::int64_t tp = cm.counts[c][c];
        const std::int64_t fp = cm.counts[c][1 - c];
        const std::int64_t fn = cm.counts[1 - c][c];
        const std::int64_t uni = tp + fp + fn;
        if (uni == 0) continue;
        rep.present[c] = true;
        rep.iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
        sum += rep.iou[c];
        ++n;
    }
    if (n == 0) throw std::invalid_argument("mean_iou: no class has a non-empty union");
    rep.mean_iou = sum / static_cast<double>(n);
    return rep;
}

}  // namespace polarseg
