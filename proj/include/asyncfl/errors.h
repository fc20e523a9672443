/*
 * Copyright 2026 The asyncfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ASYNCFL_ERRORS_H_
#define ASYNCFL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace asyncfl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (dimension mismatch, empty fleet,
// out-of-range parameters, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Negative or otherwise malformed weight vectors.
class InvalidWeightsError : public Error {
 public:
  using Error::Error;
};

// The requested combination is well-formed but not supported by the
// closed forms (e.g. time-based weights under exponential hardware).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Local SGD produced a non-finite iterate.
class NumericOverflowError : public Error {
 public:
  NumericOverflowError(const std::string& what, int step)
      : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// A contribution exceeded the configured staleness cap.
class StalenessCapError : public Error {
 public:
  using Error::Error;
};

// Two ensemble members were given the same seed.
class SeedCollisionError : public Error {
 public:
  using Error::Error;
};

// Snapshot-dependent data was requested from a run without snapshots.
class UnavailableError : public Error {
 public:
  using Error::Error;
};

}  // namespace asyncfl

#endif  // ASYNCFL_ERRORS_H_
