#pragma once

#include <stdexcept>
#include <string>

namespace conelq {

/// Stable error codes. The CLI maps each code to a documented exit bucket,
/// so additions here must be reflected in tools/ and the README.
enum class Errc {
    Io,
    BadInput,
    NegativeOffDiagonal,
    RowSumNonzero,
    StabilityViolated,
    UnsupportedCase,
    PreconditionViolated,
    IllPosed,
    NotPositiveDefinite,
    NonConvergence,
    FaceLimitExceeded,
    SideConditionViolated,
    StepTooLarge,
    MaxRoundsExceeded,
    NewtonDiverged,
    NegativeRoot,
    SingularSystem,
    MonotonicityViolated,
    PositivityViolated,
    NoDecay,
    ExplodedPath,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace conelq
