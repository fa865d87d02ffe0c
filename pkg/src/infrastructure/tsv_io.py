"""
Readers and writers for the pipeline's plain-text outputs: feature TSVs,
coefficient files, evaluation reports and bin CSVs.

Every output starts with a ``# fingerprint=...`` header line naming the
feature configuration it was produced under.
"""
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import pandas as pd
from dotenv import dotenv_values
from loguru import logger

from src.models.cascade_models import BinSummary, EvalReport, FeatureRow, ModelCoefficients, ModelVariant
from src.models.errors import ConfigMismatchError, DataError

FEATURE_COLUMNS = ["tweet_id", "n_adopters", "early_pop", "final_pop", "density", "depth", "excluded_reason"]
REPORT_COLUMNS = ["variant", "rmse", "mae", "n_test", "n_train", "split_seed", "coeffs"]
BIN_COLUMNS = ["bin_lo", "bin_hi", "mean_final_pop", "count"]
MISSING = "-"

PathLike = Union[str, Path]


def format_float(value: Optional[float]) -> str:
    """Shortest round-trip text of a float; ``-`` for missing values"""
    if value is None:
        return MISSING
    return repr(float(value))


def header_line(feature_settings: Dict[str, object], fingerprint: str) -> str:
    fields = " ".join(f"{k}={v}" for k, v in feature_settings.items())
    return f"# fingerprint={fingerprint} {fields}\n"


def parse_header(line: str) -> Dict[str, str]:
    if not line.startswith("#"):
        return {}
    fields = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if sep:
            fields[key] = value
    return fields


def read_header(path: PathLike) -> Dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_header(f.readline())


def check_fingerprint(what: str, found: Optional[str], expected: Optional[str]) -> None:
    if expected is not None and found != expected:
        raise ConfigMismatchError(what, expected, found)


def feature_line(row: FeatureRow) -> str:
    return "\t".join([
        row.tweet_id,
        str(row.n_adopters),
        str(row.early_pop),
        str(row.final_pop),
        format_float(row.density),
        str(row.depth),
        row.excluded_reason or MISSING,
    ]) + "\n"


def write_feature_rows(
    rows: Iterable[FeatureRow],
    path: PathLike,
    feature_settings: Dict[str, object],
    fingerprint: str,
) -> int:
    """Write rows in the order given; returns the number written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(header_line(feature_settings, fingerprint))
        f.write("\t".join(FEATURE_COLUMNS) + "\n")
        for row in rows:
            f.write(feature_line(row))
            written += 1
    logger.info(f"Wrote {written} feature rows to {path}")
    return written


class ExclusionLog:
    """Streaming writer of the tweets left out of the regression and why.

    Rows are written as they pass through, so a run over millions of
    mostly excluded tweets holds none of them.
    """

    def __init__(self, path: PathLike, fingerprint: str):
        self.path = Path(path)
        self.fingerprint = fingerprint
        self.count = 0
        self._file = None

    def __enter__(self) -> "ExclusionLog":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8", newline="\n")
        self._file.write(f"# fingerprint={self.fingerprint}\n")
        self._file.write("tweet_id\texcluded_reason\n")
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self._file.close()
        self._file = None
        logger.info(f"Logged {self.count} excluded tweets to {self.path}")

    def record(self, row: FeatureRow) -> None:
        if row.included:
            return
        if self._file is None:
            raise RuntimeError("ExclusionLog used outside its with-block")
        self._file.write(f"{row.tweet_id}\t{row.excluded_reason}\n")
        self.count += 1

    def track(self, rows: Iterable[FeatureRow]) -> Iterator[FeatureRow]:
        """Pass rows through unchanged, logging the excluded ones on the way"""
        for row in rows:
            self.record(row)
            yield row


def read_feature_rows(path: PathLike, expected_fingerprint: Optional[str] = None) -> Tuple[List[FeatureRow], Dict[str, str]]:
    """Load a feature TSV, rebuilding the log columns from its header's density floor"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    header = read_header(path)
    check_fingerprint(f"feature file {path}", header.get("fingerprint"), expected_fingerprint)
    density_floor = float(header.get("density_floor", "1e-06"))

    try:
        frame = pd.read_csv(
            path,
            sep="\t",
            skiprows=1,
            dtype=str,
            keep_default_na=False,
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot parse feature file {path}: {e}") from e
    missing = [c for c in FEATURE_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"feature file {path} lacks columns: {', '.join(missing)}")

    rows = []
    for line_number, record in enumerate(frame.itertuples(index=False), start=3):
        try:
            rows.append(FeatureRow.build(
                tweet_id=record.tweet_id,
                n_adopters=int(record.n_adopters),
                early_pop=int(record.early_pop),
                final_pop=int(record.final_pop),
                density=None if record.density == MISSING else float(record.density),
                depth=int(record.depth),
                excluded_reason=None if record.excluded_reason == MISSING else record.excluded_reason,
                density_floor=density_floor,
            ))
        except ValueError as e:
            raise DataError(f"{path}:{line_number}: {e}") from e
    logger.info(f"Read {len(rows)} feature rows from {path}")
    return rows, header


def save_coefficients(model: ModelCoefficients, path: PathLike, feature_settings: Dict[str, object]) -> None:
    """Key-value text file: variant, ordered coefficients, n_train and the feature config"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"variant={model.variant.value}",
        f"coeffs={','.join(format_float(c) for c in model.coeffs)}",
        f"n_train={model.n_train}",
        f"fingerprint={model.fingerprint or ''}",
    ]
    lines += [f"{k}={v}" for k, v in feature_settings.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Saved {model.variant.value} coefficients to {path}")


def load_coefficients(path: PathLike, expected_fingerprint: Optional[str] = None) -> ModelCoefficients:
    path = Path(path)
    if not path.exists():
        raise DataError(f"coefficient file not found: {path}")
    values = dotenv_values(path)
    try:
        model = ModelCoefficients(
            variant=ModelVariant(values["variant"]),
            coeffs=tuple(float(c) for c in values["coeffs"].split(",")),
            n_train=int(values["n_train"]),
            fingerprint=values.get("fingerprint") or None,
        )
    except (KeyError, ValueError, AttributeError) as e:
        raise DataError(f"malformed coefficient file {path}: {e}") from e
    check_fingerprint(f"coefficient file {path}", model.fingerprint, expected_fingerprint)
    return model


def coefficients_path(output_dir: PathLike, variant: ModelVariant) -> Path:
    return Path(output_dir) / f"coeffs_{variant.value}.txt"


def write_reports(reports: Sequence[EvalReport], path: PathLike, fingerprint: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# fingerprint={fingerprint}\n")
        f.write("\t".join(REPORT_COLUMNS) + "\n")
        for report in reports:
            f.write("\t".join([
                report.variant.value,
                format_float(report.rmse),
                format_float(report.mae),
                str(report.n_test),
                str(report.n_train) if report.n_train is not None else MISSING,
                str(report.split_seed),
                ",".join(format_float(c) for c in report.coeffs) or MISSING,
            ]) + "\n")
    logger.info(f"Wrote {len(reports)} evaluation reports to {path}")


def write_bin_summary(summary: BinSummary, path: PathLike, fingerprint: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [[b.bin_lo, b.bin_hi, b.mean_final_pop, b.count] for b in summary.bins],
        columns=BIN_COLUMNS,
    )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# fingerprint={fingerprint} axis={summary.axis.value}\n")
        frame.to_csv(f, index=False, na_rep="", float_format="%.10g", lineterminator="\n")
    logger.info(f"Wrote {summary.axis.value} bins to {path}")


def rows_equal(a: FeatureRow, b: FeatureRow) -> bool:
    """Field-for-field equality as written to a feature file"""
    return feature_line(a) == feature_line(b)
