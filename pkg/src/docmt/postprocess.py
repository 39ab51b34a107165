"""Output-repair rules: symbol-run compression, complex-table suppression,
and space normalization for Chinese output."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from .core import SchemaError, is_cjk

DEFAULT_SPECIAL_SYMBOLS = frozenset({"-", "…", "_", "*", "=", "~", "."})

# Minimal bundled lexicon for the built-in greedy segmenter. Segmentation
# only decides token boundaries; the default space rule does not depend on
# segmentation quality.
_BUILTIN_LEXICON = frozenset({
    "你好", "世界", "朋友", "我们", "他们", "没有", "可以", "什么", "时间",
    "中国", "翻译", "文档", "图像", "模型", "表格", "内容", "结果", "系统",
    "学习", "方法", "数据", "处理", "输出", "语言", "文本", "识别", "阅读",
    "习惯", "空格", "符号",
})


def segment_chinese(text: str, lexicon: frozenset = _BUILTIN_LEXICON) -> list[str]:
    """Greedy longest-match segmentation with single-character fallback."""
    max_len = max((len(w) for w in lexicon), default=1)
    out = []
    i = 0
    while i < len(text):
        for length in range(min(max_len, len(text) - i), 1, -1):
            if text[i : i + length] in lexicon:
                out.append(text[i : i + length])
                i += length
                break
        else:
            out.append(text[i])
            i += 1
    return out


SEGMENTERS: dict[str, Callable[[str], list[str]]] = {
    "builtin": segment_chinese,
}


class Rule(str, enum.Enum):
    RUN_COMPRESSED = "run_compressed"
    TABLE_SUPPRESSED = "table_suppressed"
    SPACES_COLLAPSED = "spaces_collapsed"


@dataclass(frozen=True)
class PostprocessConfig:
    special_symbols: frozenset = DEFAULT_SPECIAL_SYMBOLS
    max_run_length: int = 10
    table_pipe_threshold: int = 50
    table_row_threshold: int = 20
    collapse_spaces: bool = True
    segmenter: str = "builtin"
    # Also removes single spaces at CJK word boundaries; off by default
    # because the observable contract is space collapsing only.
    strip_cjk_boundary_spaces: bool = False

    def __post_init__(self):
        if self.max_run_length < 1:
            raise SchemaError("max_run_length must be >= 1")
        if self.table_pipe_threshold < 1 or self.table_row_threshold < 1:
            raise SchemaError("table thresholds must be >= 1")
        if not self.special_symbols:
            raise SchemaError("special_symbols must be non-empty")
        if self.segmenter not in SEGMENTERS:
            raise SchemaError(f"unknown segmenter {self.segmenter!r}")
        object.__setattr__(self, "special_symbols", frozenset(self.special_symbols))

    @classmethod
    def from_dict(cls, data: dict) -> "PostprocessConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown postprocess config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class PostprocessReport:
    rules_fired: tuple[Rule, ...]
    runs_compressed: int
    output_text: str


def compress_runs(text: str, config: PostprocessConfig = PostprocessConfig()) -> tuple[str, int]:
    """Cap every maximal run of one identical special symbol at
    max_run_length; returns the new text and the number of runs shortened."""
    out = []
    count = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        j = i + 1
        while j < n and text[j] == ch:
            j += 1
        run_len = j - i
        if ch in config.special_symbols and run_len > config.max_run_length:
            out.append(ch * config.max_run_length)
            count += 1
        else:
            out.append(text[i:j])
        i = j
    return "".join(out), count


def suppress_complex_table(text: str,
                           config: PostprocessConfig = PostprocessConfig()) -> tuple[str, bool]:
    """Empty the output when it looks like an overly complex table: too many
    pipe delimiters overall, or too many pipe-bearing rows."""
    pipes = text.count("|")
    rows = sum(1 for line in text.split("\n") if line.count("|") >= 2)
    if pipes >= config.table_pipe_threshold or rows >= config.table_row_threshold:
        return "", True
    return text, False


def normalize_spaces(text: str, config: PostprocessConfig = PostprocessConfig()) -> str:
    """Collapse runs of two or more ASCII spaces to one and trim leading and
    trailing spaces. Newlines and tabs are untouched. The configured Chinese
    segmenter only decides token boundaries; with strip_cjk_boundary_spaces
    it also drops spaces between adjacent CJK words."""
    if not config.collapse_spaces:
        return text
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] == " ":
            j = i
            while j < n and text[j] == " ":
                j += 1
            out.append(" ")
            i = j
        else:
            out.append(text[i])
            i += 1
    collapsed = "".join(out)
    collapsed = collapsed.strip(" ")
    if config.strip_cjk_boundary_spaces:
        segment = SEGMENTERS[config.segmenter]
        chars = []
        for k, ch in enumerate(collapsed):
            if (ch == " " and 0 < k < len(collapsed) - 1
                    and is_cjk(collapsed[k - 1]) and is_cjk(collapsed[k + 1])
                    and segment(collapsed[k - 1] + collapsed[k + 1])):
                continue
            chars.append(ch)
        collapsed = "".join(chars)
    return collapsed


def run_pipeline(text: str,
                 config: PostprocessConfig = PostprocessConfig()) -> PostprocessReport:
    """Apply suppression, run compression, then space normalization, and
    report which rules changed the text."""
    fired = []
    current, suppressed = suppress_complex_table(text, config)
    if suppressed and current != text:
        fired.append(Rule.TABLE_SUPPRESSED)
    compressed, runs = compress_runs(current, config)
    if compressed != current:
        fired.append(Rule.RUN_COMPRESSED)
    current = compressed
    normalized = normalize_spaces(current, config)
    if normalized != current:
        fired.append(Rule.SPACES_COLLAPSED)
    return PostprocessReport(
        rules_fired=tuple(fired),
        runs_compressed=runs,
        output_text=normalized,
    )
