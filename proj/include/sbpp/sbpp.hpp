#pragma once

#include "sbpp/error.hpp"
#include "sbpp/torus.hpp"
#include "sbpp/spectral.hpp"
#include "sbpp/fields.hpp"
#include "sbpp/field_io.hpp"
#include "sbpp/bopp_podolsky.hpp"
#include "sbpp/energy.hpp"
#include "sbpp/barycenter.hpp"
#include "sbpp/nehari.hpp"
#include "sbpp/photography.hpp"
#include "sbpp/diagnostics.hpp"
#include "sbpp/config.hpp"
#include "sbpp/experiment.hpp"
