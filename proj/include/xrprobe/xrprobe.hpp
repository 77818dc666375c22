#pragma once

#include "xrprobe/bundle.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/fairness.hpp"
#include "xrprobe/manifest.hpp"
#include "xrprobe/metrics/classification.hpp"
#include "xrprobe/metrics/detection.hpp"
#include "xrprobe/metrics/nlg.hpp"
#include "xrprobe/metrics/report.hpp"
#include "xrprobe/metrics/segmentation.hpp"
#include "xrprobe/nn/gradcheck.hpp"
#include "xrprobe/nn/layers.hpp"
#include "xrprobe/nn/losses.hpp"
#include "xrprobe/nn/optim.hpp"
#include "xrprobe/nn/tensor.hpp"
#include "xrprobe/pca.hpp"
#include "xrprobe/pgm.hpp"
#include "xrprobe/probe/data.hpp"
#include "xrprobe/probe/io.hpp"
#include "xrprobe/probe/models.hpp"
#include "xrprobe/probe/train.hpp"
#include "xrprobe/report_prep.hpp"
#include "xrprobe/retrieval.hpp"
#include "xrprobe/rng.hpp"
#include "xrprobe/splits.hpp"
#include "xrprobe/synth.hpp"
#include "xrprobe/cli/config.hpp"
#include "xrprobe/cli/run.hpp"
#include "xrprobe/cli/table.hpp"
