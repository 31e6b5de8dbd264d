"""Generation adapters.

An adapter turns a batch of input strings into a batch of answers under
greedy decoding. The echo adapter ships for CI so protocol conformance never
needs model weights; the transformers adapter loads any local seq2seq
checkpoint. Input serialization into a single string is the caller's job;
model-family quirks (special tokens, truncation) live here.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from .config import ServerConfig


class Adapter(Protocol):
    model_id: str

    def generate_greedy(self, inputs: Sequence[str], max_new_tokens: int) -> list[str]:
        ...


class EchoAdapter:
    """Returns inputs unchanged; the identity checkpoint for conformance tests."""

    model_id = "echo"

    def generate_greedy(self, inputs: Sequence[str], max_new_tokens: int) -> list[str]:
        return list(inputs)


class TransformersAdapter:
    """Greedy decoding over a local Hugging Face seq2seq checkpoint."""

    def __init__(self, checkpoint: str, device: str = "cpu"):
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self.model_id = checkpoint
        self.device = device
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint).to(device)
        self.model.eval()

    def generate_greedy(self, inputs: Sequence[str], max_new_tokens: int) -> list[str]:
        import torch

        encoded = self.tokenizer(
            list(inputs), return_tensors="pt", padding=True, truncation=True
        ).to(self.device)
        with torch.no_grad():
            output = self.model.generate(
                **encoded,
                max_new_tokens=max_new_tokens,
                num_beams=1,
                do_sample=False,
            )
        return self.tokenizer.batch_decode(output, skip_special_tokens=True)


def load_adapter(config: ServerConfig) -> Adapter:
    if config.model == "echo":
        return EchoAdapter()
    return TransformersAdapter(config.model, config.device)
