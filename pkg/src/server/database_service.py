from .models import db, SearchRun, CandidateRow


class RunStoreError(Exception):
    """A ledger operation failed; the session has been rolled back."""


class RunService:
    """Database service for search-run operations."""

    @staticmethod
    def add_run(run_data):
        """Add a run and its candidates; returns the new run id."""
        try:
            run = SearchRun.from_dict(run_data)
            db.session.add(run)
            db.session.flush()  # Get the ID without committing

            for candidate in run_data.get('candidates') or []:
                db.session.add(CandidateRow.from_dict(candidate, run_id=run.id))

            db.session.commit()
            return run.id

        except Exception as e:
            db.session.rollback()
            raise RunStoreError(f"Failed to add run: {str(e)}")

    @staticmethod
    def get_run(run_id, with_candidates=False):
        """Get a run by ID, or None."""
        try:
            run = db.session.get(SearchRun, run_id)
            if run:
                return run.to_dict(with_candidates=with_candidates)
            return None
        except Exception as e:
            raise RunStoreError(f"Failed to get run: {str(e)}")

    @staticmethod
    def get_all_runs():
        """Get all runs, newest first."""
        try:
            runs = db.session.execute(db.select(SearchRun).order_by(SearchRun.created_at.desc())).scalars()
            return [run.to_dict() for run in runs]
        except Exception as e:
            raise RunStoreError(f"Failed to get runs: {str(e)}")

    @staticmethod
    def get_candidates(run_id):
        """Get the candidates of a run in discovery order, or None for an unknown run."""
        try:
            run = db.session.get(SearchRun, run_id)
            if not run:
                return None
            return [c.to_dict() for c in run.candidates]
        except Exception as e:
            raise RunStoreError(f"Failed to get candidates: {str(e)}")

    @staticmethod
    def delete_run(run_id):
        """Delete a run and its candidates."""
        try:
            run = db.session.get(SearchRun, run_id)
            if not run:
                return False

            db.session.delete(run)
            db.session.commit()
            return True

        except Exception as e:
            db.session.rollback()
            raise RunStoreError(f"Failed to delete run: {str(e)}")

    @staticmethod
    def get_runs_by_resolution(resolution):
        """Get runs voxelized at the given resolution."""
        try:
            runs = db.session.execute(db.select(SearchRun).filter_by(resolution=resolution)).scalars()
            return [run.to_dict() for run in runs]
        except Exception as e:
            raise RunStoreError(f"Failed to get runs by resolution: {str(e)}")
