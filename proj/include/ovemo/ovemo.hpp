#pragma once

#include "ovemo/backend.hpp"
#include "ovemo/caption.hpp"
#include "ovemo/config.hpp"
#include "ovemo/core.hpp"
#include "ovemo/error.hpp"
#include "ovemo/fusion.hpp"
#include "ovemo/http_backend.hpp"
#include "ovemo/ingest.hpp"
#include "ovemo/labelspace.hpp"
#include "ovemo/metrics.hpp"
#include "ovemo/runflow.hpp"
#include "ovemo/sampler.hpp"
#include "ovemo/templates.hpp"
