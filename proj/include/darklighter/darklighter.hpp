#pragma once

#include "darklighter/activation.hpp"
#include "darklighter/adam.hpp"
#include "darklighter/bench.hpp"
#include "darklighter/conv.hpp"
#include "darklighter/dlwt.hpp"
#include "darklighter/enhancer.hpp"
#include "darklighter/error.hpp"
#include "darklighter/feature_extractor.hpp"
#include "darklighter/gradcheck.hpp"
#include "darklighter/gradient_suite.hpp"
#include "darklighter/image_io.hpp"
#include "darklighter/losses.hpp"
#include "darklighter/menet.hpp"
#include "darklighter/tensor.hpp"
#include "darklighter/trainer.hpp"
#include "darklighter/weights.hpp"
