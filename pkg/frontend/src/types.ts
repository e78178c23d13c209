// Wire formats, mirroring the server's JSON bodies one to one.

export type FieldKind = "identifier" | "quantitative" | "categorical";

export interface FieldDef {
  name: string;
  kind: FieldKind;
  unit?: string;
}

export interface EntityDef {
  name: string;
  key: string;
  dataset_entity: boolean;
  fields: FieldDef[];
}

export interface RelationDef {
  parent: string;
  child: string;
  foreign_key: string;
}

export interface SchemaWire {
  entities: EntityDef[];
  relations: RelationDef[];
}

export interface SummaryWire {
  entity: string;
  field: string;
  kind: "quantitative" | "categorical";
  unit?: string;
  min?: number;
  max?: number;
  values?: string[];
  cardinality?: number;
}

export interface FilterSourceWire {
  type: "agent" | "view";
  message?: number;
  view?: string;
}

export interface IntervalFilterWire {
  id: string;
  kind: "interval";
  entity: string;
  field: string;
  min: number;
  max: number;
  source: FilterSourceWire;
  edited: boolean;
}

export interface PointFilterWire {
  id: string;
  kind: "point";
  entity: string;
  field: string;
  values: string[];
  source: FilterSourceWire;
  edited: boolean;
}

export type FilterWire = IntervalFilterWire | PointFilterWire;

export interface ChatEntryWire {
  role: "user" | "agent" | "system";
  text: string;
  message?: number;
  widget?: string;
  view?: string;
}

export type SelectionKind = "point" | "interval_1d" | "interval_2d";

export interface SelectionDeclWire {
  kind: SelectionKind;
  targets: { entity: string; field: string }[];
  view: string;
}

export interface SelectionPayload {
  kind: SelectionKind;
  intervals?: [number, number][];
  interval?: [number, number];
  values?: string[];
}

export interface ViewWire {
  id: string;
  caption: string;
  created_by: number;
  spec: Record<string, unknown>;
  injected_spec: Record<string, unknown>;
  selection_decl: SelectionDeclWire;
  selection: SelectionPayload | null;
}

export interface DeltaWire {
  seq: number;
  kind: string;
  chat: ChatEntryWire[];
  filters: {
    added: FilterWire[];
    updated: FilterWire[];
    removed: string[];
  };
  views: ViewWire[];
  selections: { view: string; payload: SelectionPayload | null }[];
  refresh: string[];
}

export interface SnapshotWire {
  session_id: string;
  seq: number;
  chat: ChatEntryWire[];
  filters: FilterWire[];
  views: ViewWire[];
}

export type Cell = string | number | null;

export interface TableWire {
  columns: { name: string; kind: "nominal" | "quantitative" }[];
  rows: Cell[][];
  total_row_count: number;
  filter_version: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  path?: string;
}

export type IntervalUpdate = { min: number; max: number };
export type PointUpdate = { values: string[] };
export type FilterUpdate = IntervalUpdate | PointUpdate;
