#pragma once

// Per-image segmentation record, shared between the segment and eval drivers.

#include <string>

#include "polarseg/postprocess.hpp"

namespace polarseg {

struct SegmentationRecord {
    std::string stem;
    bool disc_found = false;
    bool cup_found = false;
    bool containment_warning = false;  // cup ellipse pokes outside the disc ellipse
    EllipseParams disc_ellipse;
    EllipseParams cup_ellipse;
    double cdr = 0.0;   // 0 when the cup (or disc) is missing, see flags
    double rdar = 0.0;
    double seconds = 0.0;  // console reporting only, never written to files
};

}  // namespace polarseg
