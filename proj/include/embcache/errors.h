/**
 * Copyright 2026 The embcache Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EMBCACHE_ERRORS_H_
#define EMBCACHE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace embcache {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector lengths disagree with each other or with the configured dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A peer (or the local caller) broke the request/response contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A key was expected to be resident (cache) or present (batch lookup).
class LookupError : public Error {
 public:
  using Error::Error;
};

// Truncated or inconsistent wire frame.
class FramingError : public Error {
 public:
  using Error::Error;
};

// Connection-level failure: refused, reset, closed mid-frame.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Dense rendezvous did not collect every worker's contribution.
class BarrierError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Metric is undefined for the given input (e.g. AUC with a single class).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace embcache

#endif  // EMBCACHE_ERRORS_H_
