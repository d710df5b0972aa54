#include "kpde/problem.hpp"

#include "kpde/errors.hpp"

namespace kpde {

std::string to_string(ProblemId id) {
    switch (id) {
    case ProblemId::Pendulum: return "pendulum";
    case ProblemId::Diffusion: return "diffusion";
    case ProblemId::Darcy: return "darcy";
    }
    return "unknown";
}

ProblemId problem_from_string(const std::string& name) {
    if (name == "pendulum") return ProblemId::Pendulum;
    if (name == "diffusion") return ProblemId::Diffusion;
    if (name == "darcy") return ProblemId::Darcy;
    throw InvalidArgument("unknown problem '" + name + "'");
}

}  // namespace kpde
