/*
 * Copyright 2026 The encloc Authors.
 *
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

#ifndef ENCLOC_ERRORS_HPP_
#define ENCLOC_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace encloc {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plaintext or ciphertext outside the range a key accepts.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Ciphertext presented to a key other than the one that produced it.
class WrongKeyError : public Error {
 public:
  using Error::Error;
};

// Two ciphertexts of different schemes or keys combined homomorphically.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

// Signed value does not fit in the plaintext space.
class OverflowError : public Error {
 public:
  using Error::Error;
};

class KeygenError : public Error {
 public:
  using Error::Error;
};

class DecryptionError : public Error {
 public:
  using Error::Error;
};

// Comparison parameters or key sizes that cannot support the protocol.
class SetupError : public Error {
 public:
  using Error::Error;
};

// Message out of order, wrong stage, or integrity check failure.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed wire line. `offset` is the byte position of the problem.
class FrameError : public Error {
 public:
  FrameError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace encloc

#endif  // ENCLOC_ERRORS_HPP_
