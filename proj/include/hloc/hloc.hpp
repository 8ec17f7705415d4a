#pragma once

#include "hloc/augment.hpp"
#include "hloc/classifier.hpp"
#include "hloc/dataset.hpp"
#include "hloc/descriptor.hpp"
#include "hloc/evaluation.hpp"
#include "hloc/image.hpp"
#include "hloc/image_io.hpp"
#include "hloc/localization.hpp"
#include "hloc/pipeline.hpp"
