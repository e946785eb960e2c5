#pragma once

#include "detkit/anchors.hpp"
#include "detkit/error.hpp"
#include "detkit/geometry.hpp"
#include "detkit/io.hpp"
#include "detkit/metrics.hpp"
#include "detkit/pathology.hpp"
#include "detkit/yolo_head.hpp"
