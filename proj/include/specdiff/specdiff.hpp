#pragma once

#include "specdiff/bench.hpp"
#include "specdiff/dataset.hpp"
#include "specdiff/descriptor_io.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/error.hpp"
#include "specdiff/image.hpp"
#include "specdiff/image_io.hpp"
#include "specdiff/matrix.hpp"
#include "specdiff/metrics.hpp"
#include "specdiff/model_io.hpp"
#include "specdiff/parallel.hpp"
#include "specdiff/pipeline.hpp"
#include "specdiff/protocol.hpp"
#include "specdiff/random.hpp"
#include "specdiff/report_io.hpp"
#include "specdiff/simulator.hpp"
#include "specdiff/svm.hpp"
