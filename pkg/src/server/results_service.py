from flask import Flask, jsonify
import os

from .models import db
from .database_service import RunService, RunStoreError

DEFAULT_DB_FILE = 'nasvox_runs.db'


def database_uri(path=None):
    """SQLite URI for a ledger file; defaults to nasvox_runs.db in the project root."""
    if path is None:
        basedir = os.path.abspath(os.path.dirname(__file__))
        path = os.path.join(basedir, "..", "..", DEFAULT_DB_FILE)
    if str(path).startswith('sqlite:'):
        return str(path)
    return f'sqlite:///{os.path.abspath(path)}'


def create_app(uri=None):
    """Flask app serving the run ledger over REST."""
    app = Flask(__name__)

    # Database configuration
    app.config['SQLALCHEMY_DATABASE_URI'] = uri or database_uri()
    app.config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False

    # Initialize database
    db.init_app(app)

    # Create tables
    with app.app_context():
        db.create_all()

    @app.route('/api/runs', methods=['GET'])
    def get_runs():
        """Get all runs."""
        try:
            runs = RunService.get_all_runs()
            return jsonify({'runs': runs, 'status': 'success'})
        except RunStoreError as e:
            return jsonify({'error': str(e), 'status': 'error'}), 500

    @app.route('/api/runs/<run_id>', methods=['GET'])
    def get_run(run_id):
        """Get a specific run."""
        try:
            run = RunService.get_run(run_id)
            if run:
                return jsonify({'run': run, 'status': 'success'})
            else:
                return jsonify({'error': 'Run not found', 'status': 'error'}), 404
        except RunStoreError as e:
            return jsonify({'error': str(e), 'status': 'error'}), 500

    @app.route('/api/runs/<run_id>/candidates', methods=['GET'])
    def get_candidates(run_id):
        """Get the candidates scored during a run."""
        try:
            candidates = RunService.get_candidates(run_id)
            if candidates is None:
                return jsonify({'error': 'Run not found', 'status': 'error'}), 404
            return jsonify({'candidates': candidates, 'status': 'success'})
        except RunStoreError as e:
            return jsonify({'error': str(e), 'status': 'error'}), 500

    @app.route('/api/runs/<run_id>', methods=['DELETE'])
    def delete_run(run_id):
        """Delete a run."""
        try:
            if RunService.delete_run(run_id):
                return jsonify({'status': 'success'})
            else:
                return jsonify({'error': 'Run not found', 'status': 'error'}), 404
        except RunStoreError as e:
            return jsonify({'error': str(e), 'status': 'error'}), 500

    @app.route('/api/health', methods=['GET'])
    def health_check():
        """Health check endpoint."""
        return jsonify({'status': 'healthy', 'database': 'connected'})

    return app


def record_run(db_path, run_data):
    """Store one run in the ledger file at ``db_path``; returns the run id."""
    app = create_app(database_uri(db_path))
    with app.app_context():
        return RunService.add_run(run_data)
