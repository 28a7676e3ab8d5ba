/*
 * Copyright 2026 The GSE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace gse {

// Every library failure carries the module that raised it and the stage it
// was in, so the CLI can surface "module/stage: message".
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string stage, const std::string& message)
      : std::runtime_error(module + "/" + stage + ": " + message),
        module_(std::move(module)),
        stage_(std::move(stage)) {}

  const std::string& module() const { return module_; }
  const std::string& stage() const { return stage_; }

 private:
  std::string module_;
  std::string stage_;
};

// Sinkhorn did not reach its marginal tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& stage, double residual, int iterations)
      : Error("wasserstein", stage, describe(residual, iterations)), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  static std::string describe(double residual, int iterations) {
    std::ostringstream os;
    os << "no convergence after " << iterations << " iterations (marginal residual "
       << std::scientific << residual << ")";
    return os.str();
  }

  double residual_;
};

}  // namespace gse
