#ifndef SPF_SPF_HPP
#define SPF_SPF_HPP

// Everything except file I/O (spf/io.hpp, which needs nlohmann/json).

#include "spf/errors.hpp"
#include "spf/frame_policy.hpp"
#include "spf/curves.hpp"
#include "spf/frames.hpp"
#include "spf/projection.hpp"
#include "spf/dynamics.hpp"
#include "spf/transform.hpp"
#include "spf/control.hpp"
#include "spf/sim.hpp"

#endif  // SPF_SPF_HPP
