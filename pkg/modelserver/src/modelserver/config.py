from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ServerConfig:
    model: str = "echo"
    max_input_chars: int = 4096
    max_new_tokens: int = 64
    batch_size: int = 8
    device: str = "cpu"
    port: int = 8008

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 < self.port < 65536:
            raise ValueError(f"invalid port {self.port}")
        if self.max_input_chars < 1:
            raise ValueError("max_input_chars must be positive")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")
