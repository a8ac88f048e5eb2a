from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from ..config import CONFIG
from ..errors import DimensionMismatch, NonFiniteInput, UnsupportedFamily
from ..projections import ProjectionSet
from ..types import Family, FloatArray
from .stationary import FAMILIES, profile, profile_derivative

__all__ = (
    "KernelSpec",
    "GramMatrix",
    "AdditiveKernel",
    "gam_kernel",
    "projected_additive_kernel",
    "ard_prescale_kernel",
    "gram",
    "kernel_gradients",
)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Hyperparameters of a projected additive kernel.

    ``lengthscales`` has one entry per input feature when ``prescale`` is set
    (the inputs are divided by it before projection), otherwise one entry per
    projected coordinate, concatenated over sub-kernels.
    """

    family: Family
    lengthscales: FloatArray = field(repr=False)
    output_scale: float = 1.0
    noise_variance: float = 0.01
    mixing_weights: FloatArray | None = field(default=None, repr=False)
    prescale: bool = False
    learn_mixing: bool = False

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise UnsupportedFamily(f"Unknown kernel family {self.family!r}.", family=self.family)
        lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=np.float64))
        if np.any(~np.isfinite(lengthscales)) or np.any(lengthscales <= 0):
            raise ValueError("Lengthscales must be positive and finite.")
        if not self.output_scale > 0:
            raise ValueError("Output scale must be positive.")
        if not self.noise_variance > 0:
            raise ValueError("Noise variance must be positive.")
        object.__setattr__(self, "lengthscales", lengthscales)

        if self.mixing_weights is not None:
            weights = np.atleast_1d(np.asarray(self.mixing_weights, dtype=np.float64))
            if np.any(weights < 0) or weights.sum() <= 0:
                raise ValueError("Mixing weights must be nonnegative with a positive sum.")
            object.__setattr__(self, "mixing_weights", weights / weights.sum())

    @classmethod
    def initial(
        cls,
        projections: ProjectionSet,
        family: Family = "rbf",
        *,
        prescale: bool = False,
        learn_mixing: bool = False,
    ) -> KernelSpec:
        size = projections.d if prescale else sum(projections.degrees)
        return cls(
            family,
            np.full(size, float(CONFIG.KERNELS.LENGTHSCALE)),
            float(CONFIG.KERNELS.OUTPUT_SCALE),
            float(CONFIG.KERNELS.NOISE),
            np.full(projections.J, 1.0 / projections.J),
            prescale,
            learn_mixing,
        )

    def replace(self, **changes) -> KernelSpec:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "lengthscales": self.lengthscales.tolist(),
            "output_scale": self.output_scale,
            "noise_variance": self.noise_variance,
            "mixing_weights": None if self.mixing_weights is None else self.mixing_weights.tolist(),
            "prescale": self.prescale,
            "learn_mixing": self.learn_mixing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> KernelSpec:
        return cls(**data)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: FloatArray = field(repr=False)
    symmetric: bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore


class AdditiveKernel:
    """k(x, x') = s * sum_j a_j k_j(P_j A x, P_j A x') with optional ARD pre-scaling A.

    Hyperparameters are exposed as a flat vector ``theta`` in log space:
    lengthscales, output scale, noise variance, then mixing logits when they
    are learned.
    """

    def __init__(self, projections: ProjectionSet, spec: KernelSpec) -> None:
        self.projections = projections
        self.spec = spec
        J, d = projections.J, projections.d

        expected = d if spec.prescale else sum(projections.degrees)
        if spec.lengthscales.size != expected:
            raise DimensionMismatch("lengthscales", expected, spec.lengthscales.size)
        mixing = spec.mixing_weights if spec.mixing_weights is not None else np.full(J, 1.0 / J)
        if mixing.size != J:
            raise DimensionMismatch("mixing weights", J, mixing.size)
        if spec.family == "cosine" and any(D != 1 for D in projections.degrees):
            raise UnsupportedFamily("Cosine sub-kernels are only defined on one dimensional projections.")

        self.mixing = mixing
        self.subkernel = profile(spec.family)
        self.subkernel_derivative = profile_derivative(spec.family)

        offsets = np.cumsum((0,) + projections.degrees)
        self._slices = [slice(offsets[j], offsets[j + 1]) for j in range(J)]

    def __repr__(self) -> str:
        return f"<AdditiveKernel family={self.spec.family} J={self.J} d={self.d} prescale={self.spec.prescale}>"

    # region: Hyperparameters

    @property
    def J(self) -> int:
        return self.projections.J

    @property
    def d(self) -> int:
        return self.projections.d

    @property
    def output_scale(self) -> float:
        return self.spec.output_scale

    @property
    def noise_variance(self) -> float:
        return self.spec.noise_variance

    @property
    def num_lengthscales(self) -> int:
        return self.spec.lengthscales.size

    def sub_lengthscales(self, j: int) -> FloatArray:
        if self.spec.prescale:
            return np.ones(self.projections.degrees[j])
        return self.spec.lengthscales[self._slices[j]]

    @property
    def theta(self) -> FloatArray:
        parts = [
            np.log(self.spec.lengthscales),
            [np.log(self.spec.output_scale), np.log(self.spec.noise_variance)],
        ]
        if self.spec.learn_mixing:
            parts.append(np.log(self.mixing))
        return np.concatenate(parts)

    def theta_names(self) -> list[str]:
        prefix = "log_ard" if self.spec.prescale else "log_lengthscale"
        names = [f"{prefix}[{i}]" for i in range(self.num_lengthscales)]
        names += ["log_output_scale", "log_noise"]
        if self.spec.learn_mixing:
            names += [f"mixing_logit[{j}]" for j in range(self.J)]
        return names

    @property
    def noise_index(self) -> int:
        return self.num_lengthscales + 1

    def with_theta(self, theta: FloatArray) -> AdditiveKernel:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.theta.size:
            raise DimensionMismatch("theta", self.theta.size, theta.size)
        if not np.all(np.isfinite(theta)):
            raise NonFiniteInput("Hyperparameter vector contains non-finite entries.")
        L = self.num_lengthscales
        mixing = softmax(theta[L + 2 :]) if self.spec.learn_mixing else self.mixing
        spec = self.spec.replace(
            lengthscales=np.exp(theta[:L]),
            output_scale=float(np.exp(theta[L])),
            noise_variance=float(np.exp(theta[L + 1])),
            mixing_weights=mixing,
        )
        return AdditiveKernel(self.projections, spec)

    # endregion

    # region: Evaluation

    def _check(self, X: FloatArray) -> FloatArray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise DimensionMismatch("input dimension", self.d, X.shape[1])
        return X

    def scaled_inputs(self, X: FloatArray) -> FloatArray:
        """Inputs after ARD pre-scaling (unchanged when pre-scaling is off)."""
        X = self._check(X)
        return X / self.spec.lengthscales if self.spec.prescale else X

    def features(self, X: FloatArray) -> list[FloatArray]:
        """Per sub-kernel coordinates, already divided by the sub-kernel lengthscales."""
        W = self.scaled_inputs(X)
        return [(W @ P.T) / self.sub_lengthscales(j) for j, P in enumerate(self.projections)]

    def __call__(self, x: FloatArray, x2: FloatArray) -> float:
        x = np.asarray(x, dtype=np.float64).ravel()
        x2 = np.asarray(x2, dtype=np.float64).ravel()
        if x.size != self.d or x2.size != self.d:
            raise DimensionMismatch("input dimension", self.d, (x.size, x2.size))
        lag = self.scaled_inputs(x - x2)[0]

        total = 0.0
        for degree in sorted(set(self.projections.degrees)):
            index = [j for j, D in enumerate(self.projections.degrees) if D == degree]
            stacked = np.stack([self.projections.matrices[j] for j in index])
            lengthscales = np.stack([self.sub_lengthscales(j) for j in index])
            r2 = np.sum((stacked @ lag / lengthscales) ** 2, axis=1)
            total += float(np.dot(self.mixing[index], self.subkernel(r2)))
        return self.output_scale * total

    def matrix(self, X: FloatArray, X2: FloatArray | None = None, *, noise: bool = False) -> FloatArray:
        """Noiseless cross covariance, plus the noise ridge when ``noise`` is set and X2 is X."""
        F1 = self.features(X)
        F2 = F1 if X2 is None else self.features(X2)
        K = np.zeros((F1[0].shape[0], F2[0].shape[0]))
        for j in range(self.J):
            K += self.mixing[j] * self.subkernel(cdist(F1[j], F2[j], "sqeuclidean"))
        K *= self.output_scale
        if noise:
            if X2 is not None:
                raise ValueError("The noise ridge only applies to a training covariance.")
            K[np.diag_indices_from(K)] += self.noise_variance
        return K

    def diagonal(self, X: FloatArray) -> FloatArray:
        X = self._check(X)
        return np.full(X.shape[0], self.output_scale * float(np.sum(self.mixing)))

    # endregion

    # region: Gradients

    def gradients(self, X: FloatArray) -> FloatArray:
        """Stack of dK/dtheta_l for the noisy training covariance, shape (len(theta), n, n)."""
        W = self.scaled_inputs(X)
        features = self.features(X)
        n = W.shape[0]
        s = self.output_scale

        lengthscale_grads = np.zeros((self.num_lengthscales, n, n))
        terms = []
        for j, (P, U) in enumerate(zip(self.projections, features)):
            r2 = cdist(U, U, "sqeuclidean")
            terms.append(self.subkernel(r2))
            slope = s * self.mixing[j] * self.subkernel_derivative(r2)
            lags = U[:, None, :] - U[None, :, :]
            if self.spec.prescale:
                input_lags = W[:, None, :] - W[None, :, :]
                dr2 = -2.0 * input_lags * (lags @ P)
                lengthscale_grads += np.moveaxis(slope[:, :, None] * dr2, -1, 0)
            else:
                dr2 = -2.0 * lags**2
                lengthscale_grads[self._slices[j]] += np.moveaxis(slope[:, :, None] * dr2, -1, 0)

        signal = s * np.tensordot(self.mixing, np.stack(terms), axes=1)
        grads = [*lengthscale_grads, signal, self.noise_variance * np.eye(n)]
        if self.spec.learn_mixing:
            grads += [s * self.mixing[j] * terms[j] - self.mixing[j] * signal for j in range(self.J)]
        return np.stack(grads)

    def contract_gradients(self, X: FloatArray, M: FloatArray) -> FloatArray:
        """sum_ab M_ab dK_ab/dtheta_l for every l, for symmetric M, without forming dK.

        Costs O(J n^2 (D + d)) time and O(n^2) memory.
        """
        W = self.scaled_inputs(X)
        M = np.asarray(M, dtype=np.float64)
        if M.shape != (W.shape[0], W.shape[0]):
            raise DimensionMismatch("contraction weights", (W.shape[0], W.shape[0]), M.shape)
        s = self.output_scale

        lengthscale_grad = np.zeros(self.num_lengthscales)
        contractions = np.zeros(self.J)
        for j, (P, U) in enumerate(zip(self.projections, self.features(X))):
            r2 = cdist(U, U, "sqeuclidean")
            contractions[j] = s * np.sum(M * self.subkernel(r2))
            B = M * self.subkernel_derivative(r2) * (s * self.mixing[j])
            row_sums = B.sum(axis=1)
            if self.spec.prescale:
                C = (W * row_sums[:, None] - B @ W).T @ U
                lengthscale_grad += -4.0 * np.sum(P.T * C, axis=1)
            else:
                lengthscale_grad[self._slices[j]] += -4.0 * (
                    np.sum(U**2 * row_sums[:, None], axis=0) - np.sum(U * (B @ U), axis=0)
                )

        weighted = float(np.dot(self.mixing, contractions))
        parts = [lengthscale_grad, [weighted, self.noise_variance * float(np.trace(M))]]
        if self.spec.learn_mixing:
            parts.append(self.mixing * (contractions - weighted))
        return np.concatenate(parts)

    # endregion

    def to_dict(self) -> dict:
        return {"projections": self.projections.to_dict(), "spec": self.spec.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> AdditiveKernel:
        return cls(ProjectionSet.from_dict(data["projections"]), KernelSpec.from_dict(data["spec"]))


def gam_kernel(x: FloatArray, x2: FloatArray, spec: KernelSpec) -> float:
    """Additive kernel with one equally weighted 1-D sub-kernel per coordinate."""
    d = np.asarray(x).size
    spec = spec.replace(prescale=False, mixing_weights=np.full(d, 1.0 / d), learn_mixing=False)
    return AdditiveKernel(ProjectionSet.axis(d), spec)(x, x2)


def projected_additive_kernel(x: FloatArray, x2: FloatArray, P: ProjectionSet, spec: KernelSpec) -> float:
    return AdditiveKernel(P, spec.replace(prescale=False))(x, x2)


def ard_prescale_kernel(x: FloatArray, x2: FloatArray, P: ProjectionSet, spec: KernelSpec) -> float:
    return AdditiveKernel(P, spec.replace(prescale=True))(x, x2)


def gram(kernel: AdditiveKernel, X: FloatArray, X2: FloatArray | None = None) -> GramMatrix:
    if X2 is None:
        return GramMatrix(kernel.matrix(X), True)
    return GramMatrix(kernel.matrix(X, X2), False)


def kernel_gradients(kernel: AdditiveKernel, X: FloatArray, theta: FloatArray | None = None) -> FloatArray:
    if theta is not None:
        kernel = kernel.with_theta(theta)
    return kernel.gradients(X)
