#pragma once

#include <string>

namespace kpde {

enum class ProblemId { Pendulum, Diffusion, Darcy };

std::string to_string(ProblemId id);
ProblemId problem_from_string(const std::string& name);

}  // namespace kpde
