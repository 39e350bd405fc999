# Copyright Contributors to the voxreg project
# SPDX-License-Identifier: Apache-2.0
"""Differentiable voxel volume rendering and feature regulation."""

from ._core import (
    InputError,
    NumericError,
    ShapeError,
    composite,
    fit,
    grad_check,
    grid_sample,
    lovasz_softmax,
    psi_beta,
    read_vxg,
    render_bev,
    render_camera,
    write_vxg,
)

__all__ = [
    "InputError",
    "NumericError",
    "ShapeError",
    "composite",
    "fit",
    "grad_check",
    "grid_sample",
    "lovasz_softmax",
    "psi_beta",
    "read_vxg",
    "render_bev",
    "render_camera",
    "write_vxg",
]
