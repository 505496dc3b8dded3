#pragma once

// Umbrella header: dual-fisheye projection, BEV ground truth, coarse-to-fine
// feature sampling, multi-task losses, evaluation metrics, stream
// synchronization, file codecs and the synthetic scene generator.

#include "spherebev/camera.hpp"
#include "spherebev/feature_map.hpp"
#include "spherebev/grid.hpp"
#include "spherebev/ground_truth.hpp"
#include "spherebev/io.hpp"
#include "spherebev/losses.hpp"
#include "spherebev/metrics.hpp"
#include "spherebev/sampling.hpp"
#include "spherebev/scene.hpp"
#include "spherebev/sync.hpp"
