# Copyright 2026 The DnD Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent reference values for the C++ test suite.

Every number is computed here with numpy/scipy/torch, never with the C++
library, and frozen into tests/common/oracle_values.hpp. Re-run with

    python3 tests/oracles/derive.py > tests/common/oracle_values.hpp
"""

import itertools
import math

import numpy as np
import torch

HEADER = open(__file__).read().split('"""')[0]


def softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def layer_norm(x, eps=1e-5):
    mu = x.mean()
    var = ((x - mu) ** 2).mean()
    return (x - mu) / math.sqrt(var + eps)


def bce_with_logits(z, y):
    return max(z, 0) - z * y + math.log1p(math.exp(-abs(z)))


def roc_auc_pairs(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p, n in itertools.product(pos, neg):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def ntxent(student, teacher, tau):
    s = student / np.linalg.norm(student, axis=1, keepdims=True)
    t = teacher / np.linalg.norm(teacher, axis=1, keepdims=True)
    sim = s @ t.T / tau

    def ce(m):
        out = 0.0
        for i in range(m.shape[0]):
            row = m[i]
            out += -(row[i] - (row.max() + math.log(np.exp(row - row.max()).sum())))
        return out / m.shape[0]

    return 0.5 * (ce(sim) + ce(sim.T))


def adamw_trajectory(x0, curvature, lr, wd, steps):
    x = torch.tensor(x0, dtype=torch.float64, requires_grad=True)
    a = torch.tensor(curvature, dtype=torch.float64)
    opt = torch.optim.AdamW([x], lr=lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=wd)
    for _ in range(steps):
        opt.zero_grad()
        (0.5 * (a * x * x).sum()).backward()
        opt.step()
    return x.detach().numpy()


def schedule(step, peak, warmup, total, min_frac, start_frac):
    if step < warmup:
        return peak * (start_frac + (1 - start_frac) * step / warmup)
    t = min(1.0, (step - warmup) / (total - warmup))
    return peak * (min_frac + (1 - min_frac) * 0.5 * (1 + math.cos(math.pi * t)))


def mixture_posterior_noise(components, weights, sigma, x):
    logs = []
    for comp, w in zip(components, weights):
        logs.append(math.log(w) - ((x - comp) ** 2).sum() / (2 * sigma**2))
    logs = np.array(logs)
    r = np.exp(logs - logs.max())
    r /= r.sum()
    return sum(rk * (x - comp) / sigma for rk, comp in zip(r, components))


def fmt(v):
    return repr(float(v))


def arr(name, values):
    body = ", ".join(fmt(v) for v in np.ravel(values))
    return f"inline constexpr std::array<double, {np.size(values)}> {name} = {{{body}}};"


def main():
    lines = []
    emit = lines.append

    sm = softmax(np.array([math.log(1.0), math.log(3.0)]))
    emit(arr("kSoftmaxLn1Ln3", sm))
    emit(arr("kLayerNorm13", layer_norm(np.array([1.0, 3.0]))))
    emit(f"inline constexpr double kBceLogit0Label1 = {fmt(bce_with_logits(0.0, 1.0))};")
    emit(f"inline constexpr double kPearson1234_1324 = "
         f"{fmt(np.corrcoef([1, 2, 3, 4], [1, 3, 2, 4])[0, 1])};")
    emit(f"inline constexpr double kRocAucExample = "
         f"{fmt(roc_auc_pairs([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]))};")

    eye = np.eye(2)
    emit(f"inline constexpr double kNtxentOrthonormalTau001 = {fmt(ntxent(eye, eye, 0.01))};")
    emit(f"inline constexpr double kNtxentClosedForm = {fmt(math.log1p(math.exp(-100.0)))};")
    s = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [2.0, 0.0, 1.0]])
    t = np.array([[1.0, 1.0, 0.0], [0.0, 2.0, 1.0], [1.0, 0.0, 3.0]])
    emit(arr("kNtxentStudent", s))
    emit(arr("kNtxentTeacher", t))
    emit(f"inline constexpr double kNtxentGeneralTau05 = {fmt(ntxent(s, t, 0.5))};")

    emit(f"inline constexpr double kMeanAbsStandardNormal = {fmt(math.sqrt(2 / math.pi))};")

    x0 = [1.0, -2.0, 3.0]
    curv = [1.0, 2.0, 0.5]
    emit(arr("kAdamWStart", x0))
    emit(arr("kAdamWCurvature", curv))
    emit(arr("kAdamWAfter25", adamw_trajectory(x0, curv, 0.1, 0.1, 25)))

    steps = [0, 5, 10, 55, 100, 150]
    emit("inline constexpr std::array<std::int64_t, 6> kScheduleSteps = {"
         + ", ".join(str(s) for s in steps) + "};")
    emit(arr("kScheduleLr", [schedule(s, 1e-3, 10, 100, 0.1, 0.0) for s in steps]))

    comps = [np.array([[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]]),
             np.array([[0.0, 0.2, 0.0], [1.4, 0.0, 0.3]])]
    x = np.array([[0.05, 0.1, -0.02], [1.45, 0.05, 0.1]])
    emit(arr("kMixtureComponentA", comps[0]))
    emit(arr("kMixtureComponentB", comps[1]))
    emit(arr("kMixturePoint", x))
    emit(arr("kMixtureNoise", mixture_posterior_noise(comps, [0.3, 0.7], 0.1, x)))

    out = [HEADER.replace("#", "//").rstrip(), "",
           "// Generated by tests/oracles/derive.py. Do not edit by hand.", "",
           "#pragma once", "", "#include <array>", "#include <cstdint>", "",
           "namespace dnd::testing {", ""]
    out += lines
    out += ["", "}  // namespace dnd::testing", ""]
    print("\n".join(out))


if __name__ == "__main__":
    main()
