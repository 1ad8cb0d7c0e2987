#pragma once

#include <string>

#include "flat/error.hpp"

namespace flat::detail {

/// Runs `f`, relabelling library errors with the pipeline stage they came from.
template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string(stage) + ": " + e.what(), e.last_iterate(), e.sweeps(),
                               e.last_step());
    } catch (const Error& e) {
        throw StageError(stage, e.kind(), e.what());
    }
}

}  // namespace flat::detail
