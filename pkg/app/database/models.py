from datetime import datetime, timezone

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship

from app.database.base import Base


def _now():
    return datetime.now(timezone.utc)


class Run(Base):
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    name = Column(String)
    command = Column(String)
    config = Column(Text)
    seed = Column(Integer)
    status = Column(String, default='running')
    halt_reason = Column(String, nullable=True)
    out_dir = Column(String)
    started_at = Column(DateTime, default=_now)
    finished_at = Column(DateTime, nullable=True)

    checks = relationship('CheckResult', back_populates='run', cascade='all, delete-orphan')


class CheckResult(Base):
    __tablename__ = 'check_results'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'))
    check = Column(String)
    params = Column(String)
    lhs = Column(Float)
    rhs = Column(Float)
    constant = Column(Float)
    passed = Column(Boolean)

    run = relationship('Run', back_populates='checks')
