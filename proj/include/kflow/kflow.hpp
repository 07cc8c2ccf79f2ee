#pragma once
// Umbrella header for the numerical library. The harness (config, io, harness) needs
// nlohmann/json and OpenSSL and is included separately.

#include "core.hpp"
#include "geometry.hpp"
#include "cone.hpp"
#include "expander.hpp"
#include "gluing.hpp"
#include "flow.hpp"
#include "estimates.hpp"
#include "limits.hpp"
