// Append-only revision history for one campaign, kept in browser storage
// so the service stays stateless. Export serializes the session exactly.

import { Draft, DraftSession, RevisionEntry, WhatIfResponse } from "./types.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const PREFIX = "pbcast:session:";

export class SessionHistory {
  private session: DraftSession;

  constructor(
    private store: KeyValueStore,
    campaign: string,
    model: string,
  ) {
    const raw = store.getItem(PREFIX + campaign);
    if (raw !== null) {
      this.session = JSON.parse(raw) as DraftSession;
      this.session.model = model;
    } else {
      this.session = { campaign, model, entries: [] };
    }
  }

  get campaign(): string {
    return this.session.campaign;
  }

  get entries(): readonly RevisionEntry[] {
    return this.session.entries;
  }

  append(draft: Draft, response: WhatIfResponse, at: string): RevisionEntry {
    const entry: RevisionEntry = {
      draft: { ...draft },
      response,
      at,
    };
    this.session.entries.push(entry);
    this.persist();
    return entry;
  }

  exportJson(): string {
    return JSON.stringify(this.session, null, 2);
  }

  private persist(): void {
    this.store.setItem(PREFIX + this.session.campaign, JSON.stringify(this.session));
  }
}
