// Copyright 2026 The fedpriv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDPRIV_CLIENT_UPDATE_HPP_
#define FEDPRIV_CLIENT_UPDATE_HPP_

#include <cstddef>
#include <string>

#include "fedpriv/model.hpp"

namespace fedpriv {

// What a client sends to the server: w_local - w_global and its example count.
struct ClientUpdate {
  std::string client_id;
  ParameterVector delta;
  std::size_t n_k = 1;
  bool clipped = false;
  bool noised = false;
};

}  // namespace fedpriv

#endif  // FEDPRIV_CLIENT_UPDATE_HPP_
