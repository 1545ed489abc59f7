#pragma once

#include <cstdint>

#include "polarseg/tensor.hpp"

namespace polarseg {

// 2-class confusion counts indexed [predicted][actual].
struct ConfusionMatrix {
    std::int64_t counts[2][2] = {{0, 0}, {0, 0}};

    void accumulate(const Tensor& predicted, const Tensor& actual);
    void merge(const ConfusionMatrix& other);
    std::int64_t total() const;
};

struct IouReport {
    double iou[2] = {0.0, 0.0};
    bool present[2] = {false, false};  // class has a non-empty union
    double mean_iou = 0.0;             // mean over present classes
};

// IoU_c = TP_c / (TP_c + FP_c + FN_c); classes with an empty union are
// excluded from the mean. Throws on an all-empty matrix.
IouReport mean_iou(const ConfusionMatrix& cm);

}  // namespace polarseg
