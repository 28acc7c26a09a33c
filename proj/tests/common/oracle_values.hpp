// Copyright 2026 The DnD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Generated by tests/oracles/derive.py. Do not edit by hand.

#pragma once

#include <array>
#include <cstdint>

namespace dnd::testing {

inline constexpr std::array<double, 2> kSoftmaxLn1Ln3 = {0.25, 0.75};
inline constexpr std::array<double, 2> kLayerNorm13 = {-0.9999950000374997, 0.9999950000374997};
inline constexpr double kBceLogit0Label1 = 0.6931471805599453;
inline constexpr double kPearson1234_1324 = 0.7999999999999999;
inline constexpr double kRocAucExample = 0.75;
inline constexpr double kNtxentOrthonormalTau001 = 0.0;
inline constexpr double kNtxentClosedForm = 3.720075976020836e-44;
inline constexpr std::array<double, 9> kNtxentStudent = {1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 2.0, 0.0, 1.0};
inline constexpr std::array<double, 9> kNtxentTeacher = {1.0, 1.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.0, 3.0};
inline constexpr double kNtxentGeneralTau05 = 0.7161860257721946;
inline constexpr double kMeanAbsStandardNormal = 0.7978845608028654;
inline constexpr std::array<double, 3> kAdamWStart = {1.0, -2.0, 3.0};
inline constexpr std::array<double, 3> kAdamWCurvature = {1.0, 2.0, 0.5};
inline constexpr std::array<double, 3> kAdamWAfter25 = {-0.14097633743953153, 0.1440781870712804, 0.4157497881617208};
inline constexpr std::array<std::int64_t, 6> kScheduleSteps = {0, 5, 10, 55, 100, 150};
inline constexpr std::array<double, 6> kScheduleLr = {0.0, 0.0005, 0.001, 0.00055, 0.0001, 0.0001};
inline constexpr std::array<double, 6> kMixtureComponentA = {0.0, 0.0, 0.0, 1.5, 0.0, 0.0};
inline constexpr std::array<double, 6> kMixtureComponentB = {0.0, 0.2, 0.0, 1.4, 0.0, 0.3};
inline constexpr std::array<double, 6> kMixturePoint = {0.05, 0.1, -0.02, 1.45, 0.05, 0.1};
inline constexpr std::array<double, 6> kMixtureNoise = {0.5, 0.31523825011160117, -0.19999999999999998, -0.15761912505580072, 0.5, -0.027142624832598106};

}  // namespace dnd::testing

