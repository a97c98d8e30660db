"""
Run persistence: one SQLite file per output directory.

Declarative models mirror the RunRecord schema closely enough for the report command;
the full record stays in the CSV/JSON outputs.
"""
from __future__ import annotations

import logging
from pathlib import Path

import sqlalchemy as sa
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

from consensus_lab.core.errors import OutputError
from consensus_lab.records import RunRecord

logger = logging.getLogger("consensus_lab.harness.store")

DB_NAME = "runs.sqlite"

Base = declarative_base()


# runs
class RunRow(Base):
    __tablename__ = "runs"
    id = sa.Column(sa.Integer(), primary_key=True, autoincrement=True)
    experiment = sa.Column(sa.Text(), nullable=False, server_default=sa.text("'experiment'"))
    fingerprint = sa.Column(sa.Text(), nullable=False)
    algorithm = sa.Column(sa.Text(), nullable=False)
    topology = sa.Column(sa.Text(), nullable=False)
    problem = sa.Column(sa.Text(), nullable=False)
    seed = sa.Column(sa.Integer(), nullable=False)
    converged = sa.Column(sa.Boolean(), nullable=False)
    reason = sa.Column(sa.Text(), nullable=False)
    total_rounds = sa.Column(sa.Integer(), nullable=False)
    max_consensus_rounds = sa.Column(sa.Integer(), nullable=False, server_default=sa.text("0"))
    wall_time = sa.Column(sa.Float(), nullable=False)
    created_at = sa.Column(sa.DateTime(timezone=True), nullable=False, server_default=sa.func.now())

    metrics = relationship("MetricRow", back_populates="run", cascade="all, delete-orphan")

    __table_args__ = (
        sa.Index("idx_runs_cell", "algorithm", "topology"),
        sa.UniqueConstraint("fingerprint", "algorithm", "topology", "seed", name="ux_runs_identity"),
    )


# metrics
class MetricRow(Base):
    __tablename__ = "metrics"
    id = sa.Column(sa.Integer(), primary_key=True, autoincrement=True)
    run_id = sa.Column(sa.Integer(), sa.ForeignKey("runs.id", ondelete="CASCADE"), nullable=False)
    round = sa.Column(sa.Integer(), nullable=False)
    objective_residual = sa.Column(sa.Float(), nullable=False)
    consensus_violation = sa.Column(sa.Float(), nullable=False)
    optimality_residual = sa.Column(sa.Float(), nullable=False)
    penalty = sa.Column(sa.Float(), nullable=False)
    rho = sa.Column(sa.Float(), nullable=False)
    stationarity_bound = sa.Column(sa.Float(), nullable=False)

    run = relationship("RunRow", back_populates="metrics")

    __table_args__ = (sa.Index("idx_metrics_run_round", "run_id", "round"),)


def make_session(output_dir):
    """sessionmaker bound to <output_dir>/runs.sqlite, schema created on first use."""
    path = Path(output_dir) / DB_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path.parent}: {exc}") from exc
    engine = sa.create_engine(f"sqlite:///{path}", future=True, echo=False)
    Base.metadata.create_all(engine)
    return sessionmaker(bind=engine, expire_on_commit=False)


def save_records(records: list[RunRecord], output_dir, experiment: str = "experiment") -> int:
    """Insert or replace each record; returns the number written."""
    SessionLocal = make_session(output_dir)
    with SessionLocal() as session:
        for record in records:
            existing = session.execute(
                sa.select(RunRow).where(
                    RunRow.fingerprint == record.fingerprint,
                    RunRow.algorithm == record.algorithm,
                    RunRow.topology == record.topology,
                    RunRow.seed == record.seed,
                )
            ).scalar_one_or_none()
            if existing is not None:
                session.delete(existing)
                session.flush()
            row = RunRow(
                experiment=experiment,
                fingerprint=record.fingerprint,
                algorithm=record.algorithm,
                topology=record.topology,
                problem=record.problem,
                seed=record.seed,
                converged=record.summary.converged,
                reason=record.summary.reason,
                total_rounds=record.summary.total_rounds,
                max_consensus_rounds=record.summary.max_consensus_rounds,
                wall_time=record.summary.wall_time,
            )
            row.metrics = [MetricRow(**s.model_dump()) for s in record.samples]
            session.add(row)
        session.commit()
    logger.debug("persisted %s run(s) to %s", len(records), Path(output_dir) / DB_NAME)
    return len(records)


def load_runs(output_dir) -> list[RunRow]:
    path = Path(output_dir) / DB_NAME
    if not path.exists():
        raise OutputError(f"no run database at {path}")
    SessionLocal = make_session(output_dir)
    with SessionLocal() as session:
        return list(session.execute(sa.select(RunRow).order_by(RunRow.id)).scalars())
