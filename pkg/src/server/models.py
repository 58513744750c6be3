from flask_sqlalchemy import SQLAlchemy
from datetime import datetime, timezone
import json
import uuid

db = SQLAlchemy()


def _utcnow():
    return datetime.now(timezone.utc)


class SearchRun(db.Model):
    """One search-and-finalize run over a voxel grid."""
    __tablename__ = 'search_runs'

    id = db.Column(db.String(36), primary_key=True, default=lambda: str(uuid.uuid4()))
    name = db.Column(db.String(200), nullable=False)
    resolution = db.Column(db.Integer, nullable=False)
    seed = db.Column(db.Integer, nullable=False, default=0)
    config = db.Column(db.Text, nullable=True)
    selected_arch = db.Column(db.String(200), nullable=True)
    selected_size = db.Column(db.Integer, nullable=True)
    iou = db.Column(db.Float, nullable=True)
    cd_x1000 = db.Column(db.Float, nullable=True)
    created_at = db.Column(db.DateTime, default=_utcnow)

    # Relationship with candidates
    candidates = db.relationship('CandidateRow', backref='run', lazy=True, cascade='all, delete-orphan',
                                 order_by=lambda: [CandidateRow.round, CandidateRow.index_in_round])

    def to_dict(self, with_candidates=False):
        """Convert run to dictionary for JSON serialization."""
        data = {
            'id': self.id,
            'name': self.name,
            'resolution': self.resolution,
            'seed': self.seed,
            'config': json.loads(self.config) if self.config else None,
            'selected_arch': self.selected_arch,
            'selected_size': self.selected_size,
            'iou': self.iou,
            'cd_x1000': self.cd_x1000,
            'candidate_count': len(self.candidates),
            'created_at': self.created_at.isoformat() if self.created_at else None
        }
        if with_candidates:
            data['candidates'] = [c.to_dict() for c in self.candidates]
        return data

    @classmethod
    def from_dict(cls, data):
        """Create SearchRun instance from dictionary."""
        run = cls()
        run.name = data.get('name', 'model')
        run.resolution = int(data['resolution'])
        run.seed = int(data.get('seed', 0))
        config = data.get('config')
        run.config = json.dumps(config, sort_keys=True) if isinstance(config, dict) else config
        run.selected_arch = data.get('selected_arch')
        run.selected_size = data.get('selected_size')
        run.iou = data.get('iou')
        run.cd_x1000 = data.get('cd_x1000')
        return run

    def __repr__(self):
        return f'<SearchRun {self.id}: {self.name} N={self.resolution}>'


class CandidateRow(db.Model):
    """One scored candidate architecture of a run."""
    __tablename__ = 'candidates'

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.String(36), db.ForeignKey('search_runs.id'), nullable=False)
    round = db.Column(db.Integer, nullable=False)
    index_in_round = db.Column(db.Integer, nullable=False)
    arch = db.Column(db.String(200), nullable=False)
    acc = db.Column(db.Float, nullable=False)
    size = db.Column(db.Integer, nullable=False)
    reward = db.Column(db.Float, nullable=False)
    note = db.Column(db.String(300), nullable=True)

    def to_dict(self):
        return {
            'round': self.round,
            'index_in_round': self.index_in_round,
            'arch': self.arch,
            'acc': self.acc,
            'size': self.size,
            'reward': self.reward,
            'note': self.note
        }

    @classmethod
    def from_dict(cls, data, run_id=None):
        return cls(
            run_id=run_id,
            round=int(data['round']),
            index_in_round=int(data['index_in_round']),
            arch=str(data['arch']),
            acc=float(data['acc']),
            size=int(data['size']),
            reward=float(data['reward']),
            note=data.get('note')
        )

    def __repr__(self):
        return f'<CandidateRow {self.round}.{self.index_in_round} {self.arch}>'
